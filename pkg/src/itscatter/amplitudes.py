"""Scattering parameters, transition probabilities and analytic wavefunctions.

The driven parametric oscillator is fully characterised by the
asymptotic constants ``c1, c2`` of ``xi`` and the drive integral
``d_inf``.  From them::

    theta = |c2/c1|**2,  delta1 = arg c1,  delta2 = arg c2,
    nu = |d_inf|**2,     beta = arg d_inf, phi = (delta1 + delta2)/2 - beta

and the probabilities ``W_mn`` (out state ``m``, in state ``n``) follow
from a two-index Hermite table.

Three normalisations of the driven formula are implemented:

``theta-hermite`` (default)
    ``W = sqrt(1-theta)/(m! n!) |H_mn|^2 exp(-nu(1 - sqrt(theta) cos 2phi'))``
    where ``H_mn`` has generating function
    ``exp(b1 s + b2 t + sqrt(1-theta) s t - sqrt(theta) s^2/2 + sqrt(theta) t^2/2)``
    and ``phi' = phi + pi/2`` is the phase in the convention of ``xi``
    and ``d`` used here.  Exact; reduces to the Legendre form at ``nu = 0``.
``normalized``
    same prefactor with the plain polynomial of ``exp(s x + t y - s t)``.
``literal``
    ``((1-theta)/(m! n!))**0.5`` with the plain polynomial.

The last two coincide with the exact result only for ``theta = 0`` and
(``normalized``) column ``n = 0``.
"""

from __future__ import annotations

import cmath
import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, FocalPoint, InconsistentConstants
from .tables import format_float

CONVENTIONS = ("theta-hermite", "normalized", "literal")
MODES = ("hermite", "legendre", "oracle")


class UnitarityWarning(UserWarning):
    """Column sums miss unity by more than the truncation tail explains."""


@dataclass(frozen=True)
class ScatteringParameters:
    theta: float
    delta1: float
    delta2: float
    nu: float
    beta: float
    phi: float
    b1: complex
    b2: complex
    omega_in: float
    omega_out: float

    def reconstruct_moduli(self) -> tuple[float, float]:
        """``|c1|, |c2|`` implied by ``theta`` and the Wronskian."""
        a1 = math.sqrt(self.omega_in / self.omega_out / (1.0 - self.theta))
        return a1, a1 * math.sqrt(self.theta)

    def as_dict(self) -> dict:
        return {"theta": self.theta, "delta1": self.delta1, "delta2": self.delta2,
                "nu": self.nu, "beta": self.beta, "phi": self.phi,
                "omega_in": self.omega_in, "omega_out": self.omega_out}


def hermite_arguments(theta: float, nu: float, phi: float) -> tuple[complex, complex]:
    """``b1 = sqrt(nu(1-theta)) e^{i phi}``, ``b2 = -sqrt(nu)(e^{-i phi} - sqrt(theta) e^{i phi})``."""
    e = cmath.exp(1j * phi)
    b1 = math.sqrt(nu * (1.0 - theta)) * e
    b2 = -math.sqrt(nu) * (1.0 / e - math.sqrt(theta) * e)
    return b1, b2


def make_parameters(theta: float, nu: float = 0.0, phi: float = 0.0,
                    omega_in: float = 1.0, omega_out: float = 1.0,
                    delta1: float = 0.0, delta2: float | None = None,
                    beta: float = 0.0) -> ScatteringParameters:
    """Parameters from ``(theta, nu, phi)`` directly; phases are made consistent."""
    if not 0.0 <= theta < 1.0:
        raise DomainError("theta must lie in [0, 1)", theta=theta)
    if nu < 0:
        raise DomainError("nu must be non-negative", nu=nu)
    if delta2 is None:
        delta2 = 2.0 * (phi + beta) - delta1
    b1, b2 = hermite_arguments(theta, nu, phi)
    return ScatteringParameters(theta, delta1, delta2, nu, beta, phi, b1, b2,
                                omega_in, omega_out)


def extract_parameters(c1: complex, c2: complex, d_inf: complex, omega_in: float,
                       omega_out: float, tol: float = 1e-6) -> ScatteringParameters:
    """Polar decomposition of the asymptotic constants.

    Raises
    ------
    InconsistentConstants
        if ``|c1|^2 - |c2|^2`` differs from ``omega_in/omega_out`` by more
        than ``tol`` (relative), or ``c1 = 0``.
    """
    if abs(c1) == 0:
        raise InconsistentConstants("c1 vanishes")
    target = omega_in / omega_out
    wr = abs(c1) ** 2 - abs(c2) ** 2
    if abs(wr - target) > tol * target:
        raise InconsistentConstants("Wronskian relation violated", wronskian=wr,
                                    expected=target)
    theta = abs(c2 / c1) ** 2
    if theta >= 1.0:
        raise InconsistentConstants("theta >= 1", theta=theta)
    delta1 = cmath.phase(c1)
    delta2 = cmath.phase(c2) if c2 != 0 else 0.0
    nu = abs(d_inf) ** 2
    beta = cmath.phase(d_inf) if d_inf != 0 else 0.0
    phi = 0.5 * (delta1 + delta2) - beta
    b1, b2 = hermite_arguments(theta, nu, phi)
    return ScatteringParameters(theta, delta1, delta2, nu, beta, phi, b1, b2,
                                omega_in, omega_out)


# -- Hermite polynomials -----------------------------------------------------------

def complex_hermite(m: int, n: int, x: complex, y: complex) -> complex:
    """Two-index Hermite polynomial of ``exp(s x + t y - s t)``.

    ``H_{m+1,n} = x H_{m,n} - n H_{m,n-1}``, ``H_{0,n} = y^n``.
    """
    if m < 0 or n < 0:
        raise DomainError("Hermite indices must be non-negative", m=m, n=n)
    row = [complex(y) ** j for j in range(n + 1)]
    for _ in range(m):
        row = [x * row[j] - (j * row[j - 1] if j else 0.0) for j in range(n + 1)]
    return complex(row[n])


def hermite_table(m_max: int, n_max: int, x: complex, y: complex, kappa: complex = 1.0,
                  a: complex = 0.0, b: complex = 0.0, normalized: bool = True) -> np.ndarray:
    """Table of ``H_ij`` for ``exp(x s + y t - kappa s t + a s^2/2 + b t^2/2)``.

    With ``normalized`` the entries are ``H_ij / sqrt(i! j!)``, which stays
    in floating range for large indices.
    """
    h = np.zeros((m_max + 1, n_max + 1), dtype=complex)
    h[0, 0] = 1.0
    sq = np.sqrt(np.arange(max(m_max, n_max) + 2, dtype=float))
    for i in range(m_max):
        prev = h[i - 1, 0] if i else 0.0
        if normalized:
            h[i + 1, 0] = (x * h[i, 0] + a * sq[i] * prev) / sq[i + 1]
        else:
            h[i + 1, 0] = x * h[i, 0] + a * i * prev
    for j in range(n_max):
        left = h[:, j - 1] if j else np.zeros(m_max + 1)
        up = np.concatenate([[0.0], h[:-1, j]])
        if normalized:
            h[:, j + 1] = (y * h[:, j] - kappa * sq[:m_max + 1] * up
                           + b * sq[j] * left) / sq[j + 1]
        else:
            h[:, j + 1] = y * h[:, j] - kappa * np.arange(m_max + 1) * up + b * j * left
    return h


def _hermite_block(params: ScatteringParameters, m_max: int, n_max: int, convention: str):
    """``W`` block for the driven formula under ``convention``."""
    th, nu = params.theta, params.nu
    if not 0.0 <= th < 1.0:
        raise DomainError("theta must lie in [0, 1)", theta=th)
    if convention not in CONVENTIONS:
        raise DomainError(f"unknown normalization convention {convention!r}", known=CONVENTIONS)
    php = params.phi + 0.5 * math.pi
    b1, b2 = hermite_arguments(th, nu, php)
    rt = math.sqrt(th)
    expo = math.exp(-nu * (1.0 - rt * math.cos(2.0 * php)))
    if convention == "theta-hermite":
        h = hermite_table(m_max, n_max, b1, b2, kappa=-math.sqrt(1.0 - th), a=-rt, b=rt)
        return math.sqrt(1.0 - th) * expo * np.abs(h) ** 2
    h = hermite_table(m_max, n_max, b1, b2)
    if convention == "normalized":
        return math.sqrt(1.0 - th) * expo * np.abs(h) ** 2
    # literal: ((1-theta)/(m! n!))^{1/2} instead of (1-theta)^{1/2}/(m! n!)
    lf = np.array([0.5 * math.lgamma(k + 1) for k in range(max(m_max, n_max) + 1)])
    scale = np.exp(0.5 * (lf[:m_max + 1, None] + lf[None, :n_max + 1]))
    return math.sqrt(1.0 - th) * expo * np.abs(h) ** 2 * scale


def transition_probability(params: ScatteringParameters, m: int, n: int,
                           convention: str = "theta-hermite") -> float:
    """Driven-parametric probability ``W_mn`` (``n`` in, ``m`` out)."""
    if m < 0 or n < 0:
        raise DomainError("quantum numbers must be non-negative", m=m, n=n)
    return float(_hermite_block(params, m, n, convention)[m, n])


# -- associated Legendre form --------------------------------------------------------

def _legendre_normalized(k: int, l: int, x: float) -> float:
    """``sqrt((l-k)!/(l+k)!) P_l^k(x)`` with Condon-Shortley phase, ``0 <= x <= 1``."""
    s = math.sqrt(max(0.0, 1.0 - x * x))
    pmm = 1.0
    for i in range(1, k + 1):
        pmm *= -math.sqrt((2 * i - 1) / (2 * i)) * s
    if l == k:
        return pmm
    p1 = x * math.sqrt(2 * k + 1) * pmm
    p0 = pmm
    for ll in range(k + 1, l):
        p2 = ((2 * ll + 1) * x * p1 - math.sqrt((ll + k) * (ll - k)) * p0) \
            / math.sqrt((ll + 1 + k) * (ll + 1 - k))
        p0, p1 = p1, p2
    return p1


def transition_probability_parametric(theta: float, m: int, n: int) -> float:
    """Undriven probability ``(n<!/n>!) sqrt(1-theta) |P^k_l(sqrt(1-theta))|^2``.

    ``k = (n> - n<)/2``, ``l = (n> + n<)/2``; zero when ``m - n`` is odd.
    """
    if not 0.0 <= theta < 1.0:
        raise DomainError("theta must lie in [0, 1)", theta=theta)
    if m < 0 or n < 0:
        raise DomainError("quantum numbers must be non-negative", m=m, n=n)
    if (m - n) % 2:
        return 0.0
    lo, hi = min(m, n), max(m, n)
    x = math.sqrt(1.0 - theta)
    return x * _legendre_normalized((hi - lo) // 2, (hi + lo) // 2, x) ** 2


def _legendre_block(theta: float, size: int) -> np.ndarray:
    W = np.zeros((size, size))
    for m in range(size):
        for n in range(m, size, 2):
            W[m, n] = W[n, m] = transition_probability_parametric(theta, m, n)
    return W


# -- matrices -----------------------------------------------------------------------

@dataclass(eq=False)
class TransitionMatrix:
    """Probabilities ``W[m, n]`` for ``m, n <= n_max`` with unitarity diagnostics."""

    n_max: int
    W: np.ndarray
    mode: str
    convention: str | None = None
    tail: np.ndarray | None = None
    meta: Mapping = field(default_factory=dict)

    @property
    def column_sums(self) -> np.ndarray:
        return self.W.sum(axis=0)

    @property
    def column_defects(self) -> np.ndarray:
        return np.abs(1.0 - self.column_sums)

    @property
    def unitarity_defect(self) -> float:
        return float(np.max(self.column_defects))


def _tail_size(n_max):
    return 2 * n_max + 40


def assemble_matrix(params: ScatteringParameters, n_max: int, mode: str = "legendre",
                    convention: str = "theta-hermite") -> TransitionMatrix:
    """Fill ``W`` for ``m, n <= n_max`` in ``hermite`` or ``legendre`` mode.

    The truncation tail of each column is estimated from an enlarged table;
    a :class:`UnitarityWarning` is emitted when some column misses unity by
    more than its tail.
    """
    if n_max < 0:
        raise DomainError("n_max must be non-negative", n_max=n_max)
    big = _tail_size(n_max)
    if mode == "legendre":
        if params.nu != 0:
            warnings.warn("legendre mode ignores the drive (nu > 0)", stacklevel=2)
        full = _legendre_block(params.theta, big + 1)[:, :n_max + 1]
        convention_used = None
    elif mode == "hermite":
        full = _hermite_block(params, big, n_max, convention)
        convention_used = convention
    else:
        raise DomainError(f"mode {mode!r} is not analytic; use oracle.oracle_matrix")
    W = full[:n_max + 1].copy()
    tail = full[n_max + 1:].sum(axis=0)
    tm = TransitionMatrix(n_max, W, mode, convention_used, tail,
                          meta={"theta": params.theta, "nu": params.nu, "phi": params.phi})
    excess = tm.column_defects - tail
    if np.max(excess) > 1e-8:
        warnings.warn(f"unitarity defect exceeds truncation tail by {np.max(excess):.3e}",
                      UnitarityWarning, stacklevel=2)
    return tm


def write_matrix_csv(tm: TransitionMatrix, filename, metadata: Mapping | None = None) -> None:
    """``W`` with quantum-number header row/column, column sums and defect footer."""
    n = tm.n_max + 1
    meta = {"mode": tm.mode, "normalization": tm.convention or "none", **tm.meta,
            **(metadata or {})}
    with open(filename, "w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}={format_float(v) if isinstance(v, float) else v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m\\n", *range(n)])
        for m in range(n):
            w.writerow([m, *(format_float(v) for v in tm.W[m])])
        w.writerow(["column_sum", *(format_float(v) for v in tm.column_sums)])
        w.writerow(["unitarity_defect", *(format_float(v) for v in tm.column_defects)])


# -- wavefunctions ------------------------------------------------------------------

@dataclass(eq=False)
class SemiclassicalState:
    n: int
    E_v: float
    tau: float
    z_grid: np.ndarray
    values: np.ndarray
    S_eff: np.ndarray
    S_cl: float

    @property
    def norm(self) -> float:
        z = self.z_grid
        return float(np.trapezoid(np.abs(self.values) ** 2, z))


def _hermite_phys(n, x):
    h0, h1 = np.ones_like(x), 2.0 * x
    if n == 0:
        return h0
    for k in range(1, n):
        h0, h1 = h1, 2.0 * x * h1 - 2.0 * k * h0
    return h1


def evaluate_wavefunction(params: ScatteringParameters, solution, n: int, tau: float,
                          z_grid, E_kin: float = 1.0, hbar: float = 1.0
                          ) -> SemiclassicalState:
    """Parabolic-equation wavefunction of the ``n``-th incoming channel state.

    ``Psi = [(Omega_in/pi)^{1/2} / (2^n n! |xi|)]^{1/2} exp(i S_eff)
    H_n(sqrt(Omega_in) (z - eta)/|xi|)`` with

    ``S_eff = S_cl - E_v int (|xi|^-2 - (p_minus/p)^2) + eta'(z-eta)
    + xi'/(2 xi) (z-eta)^2 - p'/(2p) z^2`` and
    ``S_cl = E_kin tau/hbar - E_kin int [(eta'^2 - Omega^2 eta^2)/2 + F eta]``,
    integrals taken from the in-asymptote.  Without a momentum profile
    ``p`` is held at its asymptotic value.

    Raises
    ------
    FocalPoint
        if ``|xi(tau)|`` vanishes.
    """
    if n < 0:
        raise DomainError("n must be non-negative", n=n)
    pr = solution.profile
    wi = pr.omega_in
    z = np.asarray(z_grid, dtype=float)
    xi, dxi = solution.xi(tau)
    xi, dxi = complex(xi), complex(dxi)
    ax = abs(xi)
    if ax < 1e-12:
        raise FocalPoint("xi vanishes", tau=tau)
    eta = float(solution.eta(tau))
    deta = float(solution.eta_dot(tau))
    p_minus = pr.meta.get("p_minus") if pr.momentum_fn is not None else None

    def p_ratio(t):
        if p_minus is None:
            return 1.0, 0.0
        p, dp = pr.momentum_fn(t)
        return float(p_minus / p) ** 2, float(dp / p)

    def phase_integrand(t):
        x, _ = solution.xi(t)
        return 1.0 / abs(complex(x)) ** 2 - p_ratio(t)[0]

    F = pr.force_fn

    def action_integrand(t):
        e, de = float(solution.eta(t)), float(solution.eta_dot(t))
        f = float(F(t)) if F is not None else 0.0
        return 0.5 * (de * de - float(pr.omega2_fn(t)) * e * e) + f * e

    t0 = pr.tau_in
    opts = dict(limit=2000, epsabs=1e-12, epsrel=1e-10)
    if tau > t0:
        pts = [b for b in pr.breakpoints if t0 < b < tau] or None
        I_phase = quad(phase_integrand, t0, tau, points=pts, **opts)[0]
        I_act = quad(action_integrand, t0, tau, points=pts, **opts)[0] if solution.drive else 0.0
    else:
        I_phase = I_act = 0.0
    E_v = wi * (n + 0.5)
    S_cl = E_kin * tau / hbar - E_kin * I_act
    _, dlogp = p_ratio(tau)
    w = z - eta
    S_eff = (S_cl - E_v * I_phase + deta * w + 0.5 * (dxi / xi) * w * w
             - 0.5 * dlogp * z * z)
    pref = math.sqrt(math.sqrt(wi / math.pi) / (2.0 ** n * math.factorial(n) * ax))
    psi = pref * np.exp(1j * S_eff) * _hermite_phys(n, math.sqrt(wi) * w / ax)
    return SemiclassicalState(n=n, E_v=E_v, tau=float(tau), z_grid=z, values=psi,
                              S_eff=S_eff, S_cl=S_cl)


def incoming_state(n: int, omega: float, tau: float, z_grid, E_kin: float = 1.0,
                   hbar: float = 1.0) -> np.ndarray:
    """Asymptotic channel function ``exp(i E_kin tau/hbar - omega z^2/2) H_n(sqrt(omega) z)``, normalised."""
    z = np.asarray(z_grid, dtype=float)
    pref = math.sqrt(math.sqrt(omega / math.pi) / (2.0 ** n * math.factorial(n)))
    return (pref * np.exp(1j * E_kin * tau / hbar - 0.5 * omega * z * z)
            * _hermite_phys(n, math.sqrt(omega) * z))
