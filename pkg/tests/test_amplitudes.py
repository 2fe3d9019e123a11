import cmath
import csv
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from itscatter.amplitudes import (UnitarityWarning, assemble_matrix,
                                  complex_hermite, evaluate_wavefunction, extract_parameters,
                                  hermite_table, incoming_state, make_parameters,
                                  transition_probability, transition_probability_parametric,
                                  write_matrix_csv)
from itscatter.errors import DomainError, FocalPoint, InconsistentConstants
from itscatter.oracle import oracle_matrix
from itscatter.oscillator import analytic_profile, calibrate_drive, solve, solve_xi

from oracles import displaced_probability, hermite_by_series, legendre_probability


# -- parameter extraction ----------------------------------------------------------

def test_extract_example():
    p = extract_parameters(1.0, 0.0, 0.6 + 0.8j, 1.0, 1.0)
    assert p.theta == 0.0
    assert p.nu == pytest.approx(1.0, rel=1e-15)
    assert p.beta == pytest.approx(math.atan2(0.8, 0.6), rel=1e-15)


@settings(max_examples=50, deadline=None)
@given(theta=st.floats(0.0, 0.95), d1=st.floats(-3, 3), d2=st.floats(-3, 3),
       wi=st.floats(0.3, 3), wo=st.floats(0.3, 3), nu=st.floats(0, 4), beta=st.floats(-3, 3))
def test_extract_reconstructs_constants(theta, d1, d2, wi, wo, nu, beta):
    a1 = math.sqrt(wi / wo / (1 - theta))
    c1 = a1 * cmath.exp(1j * d1)
    c2 = a1 * math.sqrt(theta) * cmath.exp(1j * d2)
    d = math.sqrt(nu) * cmath.exp(1j * beta)
    p = extract_parameters(c1, c2, d, wi, wo)
    r1, r2 = p.reconstruct_moduli()
    assert r1 * cmath.exp(1j * p.delta1) == pytest.approx(c1, rel=1e-10, abs=1e-12)
    assert r2 * cmath.exp(1j * p.delta2) == pytest.approx(c2, rel=1e-10, abs=1e-12)
    assert p.nu == pytest.approx(nu, rel=1e-12, abs=1e-15)
    assert p.phi == pytest.approx(0.5 * (p.delta1 + p.delta2) - p.beta)


def test_inconsistent_constants():
    with pytest.raises(InconsistentConstants):
        extract_parameters(1.0, 0.5, 0.0, 1.0, 1.0)
    with pytest.raises(InconsistentConstants):
        extract_parameters(0.0, 0.0, 0.0, 1.0, 1.0)


# -- Hermite polynomials -----------------------------------------------------------

def test_hermite_low_orders():
    x, y = 0.3 + 0.2j, -1.1 + 0.4j
    assert complex_hermite(0, 0, x, y) == 1
    assert complex_hermite(1, 1, x, y) == pytest.approx(x * y - 1, rel=1e-15)
    assert complex_hermite(3, 2, x, y) == pytest.approx(hermite_by_series(3, 2, x, y),
                                                        rel=1e-12)
    with pytest.raises(DomainError):
        complex_hermite(-1, 0, x, y)


@settings(max_examples=30, deadline=None)
@given(m=st.integers(0, 8), n=st.integers(0, 8),
       xr=st.floats(-2, 2), xi=st.floats(-2, 2), yr=st.floats(-2, 2), yi=st.floats(-2, 2))
def test_hermite_recurrence_against_series(m, n, xr, xi, yr, yi):
    x, y = complex(xr, xi), complex(yr, yi)
    ref = hermite_by_series(m, n, x, y)
    val = complex_hermite(m, n, x, y)
    assert abs(val - ref) <= 1e-12 * max(1.0, abs(ref)) * 10 ** (0.3 * (m + n) / 4)
    tab = hermite_table(m, n, x, y, normalized=False)
    assert abs(tab[m, n] - ref) <= 1e-10 * max(1.0, abs(ref))


def test_normalized_table_matches_plain():
    x, y = 0.7 - 0.1j, 0.2 + 0.9j
    plain = hermite_table(10, 10, x, y, normalized=False)
    norm = hermite_table(10, 10, x, y)
    f = np.array([math.sqrt(math.factorial(k)) for k in range(11)])
    np.testing.assert_allclose(norm * f[:, None] * f[None, :], plain, rtol=1e-12, atol=1e-12)


# -- probabilities ------------------------------------------------------------------

def test_identity_without_coupling():
    for conv in ("theta-hermite", "normalized"):
        tm = assemble_matrix(make_parameters(0.0), 10, "hermite", conv)
        np.testing.assert_allclose(tm.W, np.eye(11), atol=1e-15)
    # the literal prefactor leaves n! on the diagonal
    with pytest.warns(UnitarityWarning):
        tm = assemble_matrix(make_parameters(0.0), 5, "hermite", "literal")
    np.testing.assert_allclose(np.diag(tm.W), [math.sqrt(math.factorial(k)) for k in range(6)])
    np.testing.assert_allclose(assemble_matrix(make_parameters(0.0), 10).W, np.eye(11),
                               atol=1e-15)


def test_legendre_examples():
    assert transition_probability_parametric(0.5, 0, 0) == pytest.approx(math.sqrt(0.5),
                                                                        rel=1e-14)
    assert transition_probability_parametric(0.5, 2, 0) == pytest.approx(
        0.5 * math.sqrt(0.5) * 0.5, rel=1e-14)
    assert transition_probability_parametric(0.5, 3, 0) == 0.0


@settings(max_examples=60, deadline=None)
@given(theta=st.floats(0.0, 0.9), m=st.integers(0, 30), n=st.integers(0, 30))
def test_legendre_against_scipy(theta, m, n):
    ref = legendre_probability(theta, m, n)
    val = transition_probability_parametric(theta, m, n)
    assert val == pytest.approx(ref, rel=1e-9, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(theta=st.floats(0.0, 0.9), phi=st.floats(-3, 3), m=st.integers(0, 12),
       n=st.integers(0, 12))
def test_undriven_hermite_equals_legendre(theta, phi, m, n):
    p = make_parameters(theta, 0.0, phi)
    assert transition_probability(p, m, n) == pytest.approx(
        transition_probability_parametric(theta, m, n), rel=1e-8, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(nu=st.floats(0.0, 3.0), phi=st.floats(-3, 3), m=st.integers(0, 12),
       n=st.integers(0, 12))
def test_pure_drive_is_laguerre(nu, phi, m, n):
    p = make_parameters(0.0, nu, phi)
    assert transition_probability(p, m, n) == pytest.approx(
        displaced_probability(nu, m, n), rel=1e-9, abs=1e-14)


def test_plain_normalization_breaks_pure_drive():
    p = make_parameters(0.0, 1.0, 0.0)
    assert displaced_probability(1.0, 1, 1) == pytest.approx(0.0, abs=1e-15)
    assert transition_probability(p, 1, 1, "normalized") > 1.0


@settings(max_examples=30, deadline=None)
@given(theta=st.floats(0.0, 0.5), nu=st.floats(0.0, 2.0), phi=st.floats(-3, 3))
def test_driven_matrix_doubly_stochastic(theta, nu, phi):
    # a forcing term breaks m <-> n symmetry but rows and columns still sum to one
    from itscatter.amplitudes import _hermite_block
    W = _hermite_block(make_parameters(theta, nu, phi), 400, 400, "theta-hermite")
    assert np.all(W >= 0)
    np.testing.assert_allclose(W[:, :5].sum(axis=0), 1.0, atol=1e-6)
    np.testing.assert_allclose(W[:5, :].sum(axis=1), 1.0, atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(theta=st.floats(0.0, 0.9))
def test_parity_selection(theta):
    W = assemble_matrix(make_parameters(theta), 10).W
    m, n = np.indices(W.shape)
    assert np.all(W[(m - n) % 2 == 1] == 0.0)
    np.testing.assert_array_equal(W, W.T)


@pytest.mark.parametrize("theta", [0.001, 0.01, 0.03, 0.06])
def test_elastic_dominates_when_weak(theta):
    W = assemble_matrix(make_parameters(theta), 12).W
    assert np.all(np.argmax(W[:, :6], axis=0) == np.arange(6))


def test_elastic_dominance_lost_above_threshold():
    """At theta = 0.1 the 4 -> 6 transition already beats the elastic one."""
    from oracles import tanh_T_for_theta
    assert legendre_probability(0.1, 6, 4) > legendre_probability(0.1, 4, 4)
    T = tanh_T_for_theta(0.1, 1.0, 3.0)
    prof = analytic_profile({"shape": "tanh", "omega_in": 1.0, "omega_out": 3.0, "T": T})
    ref = oracle_matrix(prof, 6).W
    assert ref[6, 4] > ref[4, 4]


def test_defect_decreases_with_size():
    p = make_parameters(0.3)
    defects = [assemble_matrix(p, n).column_defects[0] for n in (2, 6, 12, 24)]
    assert all(b < a for a, b in zip(defects, defects[1:]))


def test_tail_accounts_for_defect():
    tm = assemble_matrix(make_parameters(0.1, 0.3, 0.2), 10, "hermite")
    np.testing.assert_allclose(tm.column_sums + tm.tail, 1.0, atol=1e-8)


def test_literal_normalization_warns():
    with pytest.warns(UnitarityWarning):
        assemble_matrix(make_parameters(0.2, 1.0, 0.4), 6, "hermite", "literal")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assemble_matrix(make_parameters(0.1, 0.3, 0.2), 6, "hermite", "theta-hermite")


def test_mixed_regime_against_grid():
    prof = analytic_profile({"shape": "tanh", "omega_in": 1.0, "omega_out": 1.6, "T": 0.3},
                            {"shape": "resonant", "amplitude": 1.0, "width": 0.7,
                             "center": 1.0, "omega": 1.3})
    prof = calibrate_drive(prof, 0.5)
    sol = solve(prof)
    p = extract_parameters(sol.c1, sol.c2, sol.d_inf, prof.omega_in, prof.omega_out)
    assert p.theta > 0.01 and p.nu > 0.1
    ref = oracle_matrix(prof, 4).W
    W = assemble_matrix(p, 4, "hermite").W
    big = ref > 1e-6
    assert np.max(np.abs(W[big] - ref[big]) / ref[big]) < 2e-3
    # the plain-Hermite normalisation is measurably worse
    W2 = assemble_matrix(p, 4, "hermite", "normalized").W
    assert np.max(np.abs(W2[big] - ref[big]) / ref[big]) > 1e-2


def test_unknown_convention_and_mode():
    with pytest.raises(DomainError):
        transition_probability(make_parameters(0.1), 0, 0, "bogus")
    with pytest.raises(DomainError):
        assemble_matrix(make_parameters(0.1), 3, "oracle")


def test_matrix_csv(tmp_path):
    tm = assemble_matrix(make_parameters(0.2), 3)
    f = tmp_path / "W.csv"
    write_matrix_csv(tm, f, {"theta": 0.2})
    lines = f.read_text().splitlines()
    assert lines[0].startswith("# ")
    body = [r for r in csv.reader(l for l in lines if not l.startswith("#"))]
    assert body[0] == ["m\\n", "0", "1", "2", "3"]
    assert body[-2][0] == "column_sum" and body[-1][0] == "unitarity_defect"
    assert float(body[1][1]) == pytest.approx(tm.W[0, 0], rel=1e-11)


# -- wavefunctions -----------------------------------------------------------------

Z = np.linspace(-15, 15, 6001)


def _state(prof, n, tau):
    sol = solve(prof)
    p = extract_parameters(sol.c1, sol.c2, sol.d_inf, prof.omega_in, prof.omega_out)
    return evaluate_wavefunction(p, sol, n, tau, Z)


@pytest.mark.parametrize("n", [0, 1, 3])
@pytest.mark.parametrize("tau", [-2.0, 0.0, 0.7, 5.0])
def test_wavefunction_norm(n, tau):
    prof = analytic_profile({"shape": "tanh", "omega_in": 1.0, "omega_out": 2.0, "T": 0.4},
                            {"shape": "gaussian", "amplitude": 0.5, "width": 1.0})
    assert _state(prof, n, tau).norm == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("n", [0, 2])
def test_wavefunction_starts_in_channel_state(n):
    prof = analytic_profile({"shape": "tanh", "omega_in": 1.2, "omega_out": 2.0, "T": 0.4})
    t = prof.tau_in - 1.0
    psi = _state(prof, n, t).values
    ref = incoming_state(n, 1.2, t, Z)
    assert np.max(np.abs(psi - ref)) < 1e-8


def test_constant_frequency_state_is_stationary():
    prof = analytic_profile({"shape": "constant", "omega": 1.5})
    a = _state(prof, 0, 1.0)
    b = _state(prof, 0, 4.0)
    np.testing.assert_allclose(np.abs(a.values), np.abs(b.values), atol=1e-9)
    np.testing.assert_allclose(np.abs(a.values) ** 2,
                               math.sqrt(1.5 / math.pi) * np.exp(-1.5 * Z ** 2), atol=1e-9)


class _Degenerate:
    """Solution stub whose xi vanishes at the requested time."""

    def __init__(self, sol):
        self.profile = sol.profile
        self.drive = None

    def xi(self, t):
        return 0.0, 1.0

    def eta(self, t):
        return 0.0

    def eta_dot(self, t):
        return 0.0


def test_focal_point_detected():
    prof = analytic_profile({"shape": "constant", "omega": 1.0})
    sol = solve_xi(prof)
    with pytest.raises(FocalPoint):
        evaluate_wavefunction(make_parameters(0.0), _Degenerate(sol), 0, 0.0, Z)


@pytest.mark.parametrize("theta, n_rows", [(0.1, 100), (0.3, 100), (0.6, 300)])
def test_unitarity_restored_with_enough_rows(theta, n_rows):
    """The n_max = 30 defect is truncation: wide enough sums reach round-off."""
    for n in range(7):
        s = sum(transition_probability_parametric(theta, m, n) for m in range(n_rows + 1))
        assert abs(1 - s) < 1e-12
    short = max(abs(1 - sum(transition_probability_parametric(theta, m, n)
                            for m in range(31))) for n in range(7))
    assert short > 1e-9
