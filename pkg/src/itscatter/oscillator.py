"""Parametric oscillator in internal time.

The reduced transverse problem is a unit-mass oscillator with frequency
``Omega(tau)`` driven by ``F(tau)``::

    xi'' + Omega(tau)**2 xi = 0,      eta'' + Omega(tau)**2 eta = F(tau)

``xi`` starts as ``exp(i Omega_in tau)`` in the in-asymptote and is
decomposed at the out-asymptote as
``xi = c1 exp(i Omega_out tau) - c2 exp(-i Omega_out tau)``.  The drive
integral is ``d(tau) = (2 Omega_in)**-0.5 * integral xi F``; with this
normalisation the particular solution vanishing in the in-asymptote is
``eta = (2/Omega_in)**0.5 * Im(xi conj(d))``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import solve_ivp
from scipy.integrate._ivp.common import OdeSolution
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import (BadAsymptote, DomainError, IntegrationDrift, NonIntegrableDrive,
                     TachyonicFrequency)
from .geometry import ReactionPath
from .tables import format_float

ETA_CONVENTION = "d = (2*Omega_in)^-1/2 * int(xi*F); eta = (2/Omega_in)^1/2 * Im(xi*conj(d))"


@dataclass(frozen=True, eq=False)
class FrequencyProfile:
    """Tabulated and callable ``Omega^2(tau)`` with optional drive ``F(tau)``.

    ``omega2_fn``/``force_fn`` are what the solvers integrate; the arrays
    are samples on ``tau_grid`` for output.  ``breakpoints`` lists
    interior times where the profile is discontinuous.
    """

    tau_grid: np.ndarray
    omega2: np.ndarray
    omega_in: float
    omega_out: float
    force: np.ndarray
    source: str
    omega2_fn: Callable = field(repr=False)
    force_fn: Callable | None = field(default=None, repr=False)
    breakpoints: tuple = ()
    max_step: float = np.inf
    momentum_fn: Callable | None = field(default=None, repr=False)
    meta: Mapping = field(default_factory=dict)

    @property
    def tau_in(self) -> float:
        return float(self.tau_grid[0])

    @property
    def tau_out(self) -> float:
        return float(self.tau_grid[-1])

    @property
    def driven(self) -> bool:
        return self.force_fn is not None

    def with_force(self, force_fn, label="custom") -> "FrequencyProfile":
        force = np.zeros_like(self.tau_grid) if force_fn is None else force_fn(self.tau_grid)
        meta = dict(self.meta)
        meta["force"] = label
        return replace(self, force_fn=force_fn, force=force, meta=meta)

    def scaled_force(self, factor: float) -> "FrequencyProfile":
        if self.force_fn is None:
            raise DomainError("profile has no drive to scale")
        f = self.force_fn
        meta = dict(self.meta)
        meta["force_scale"] = meta.get("force_scale", 1.0) * factor
        return replace(self, force_fn=lambda t: factor * f(t), force=factor * self.force,
                       meta=meta)


# -- analytic shapes --------------------------------------------------------------

def _sech2(s):
    return 1.0 / np.cosh(np.clip(s, -350, 350)) ** 2


def _omega2_shape(spec):
    shape = spec.get("shape")
    g = lambda k, d=None: float(spec[k]) if k in spec else d
    if shape == "constant":
        w = g("omega")
        return (lambda t: np.full_like(np.asarray(t, float), w * w)), w, w, (), (-10 / w, 10 / w), np.inf
    if shape == "step":
        wi, wo, t0 = g("omega_in"), g("omega_out"), g("tau0", 0.0)
        fn = lambda t: np.where(np.asarray(t, float) < t0, wi * wi, wo * wo)
        span = 10.0 / min(wi, wo)
        return fn, wi, wo, (t0,), (t0 - span, t0 + span), np.inf
    if shape == "tanh":
        wi, wo, T, t0 = g("omega_in"), g("omega_out"), g("T"), g("tau0", 0.0)
        if not T > 0:
            raise DomainError("tanh profile needs T > 0", T=T)
        mid, half = 0.5 * (wi * wi + wo * wo), 0.5 * (wo * wo - wi * wi)
        fn = lambda t: mid + half * np.tanh((np.asarray(t, float) - t0) / T)
        # tanh tails reach 1 - 2e-20 at 23 T
        span = 23.0 * T + 4.0 / min(wi, wo)
        return fn, wi, wo, (), (t0 - span, t0 + span), T / 4
    if shape == "sech2":
        w, A, T, t0 = g("omega"), g("amplitude"), g("T"), g("tau0", 0.0)
        if not A > -1:
            raise DomainError("sech2 profile needs amplitude > -1 for Omega^2 > 0", amplitude=A)
        fn = lambda t: w * w * (1.0 + A * _sech2((np.asarray(t, float) - t0) / T))
        span = 23.0 * T + 4.0 / w
        return fn, w, w, (), (t0 - span, t0 + span), T / 4
    raise DomainError(f"unknown omega2 shape {shape!r}")


def _force_shape(spec):
    if spec is None or spec.get("shape", "none") == "none":
        return None, None, np.inf
    shape = spec["shape"]
    A = float(spec.get("amplitude", 1.0))
    c = float(spec.get("center", 0.0))
    w = float(spec["width"])
    span = (c - 9.0 * w, c + 9.0 * w)     # exp(-40.5) ~ 3e-18
    if shape == "gaussian":
        return (lambda t: A * np.exp(-0.5 * ((np.asarray(t, float) - c) / w) ** 2)), span, w / 4
    if shape == "resonant":
        om = float(spec["omega"])
        fn = lambda t: A * np.exp(-0.5 * ((np.asarray(t, float) - c) / w) ** 2) * np.cos(om * (np.asarray(t, float) - c))
        return fn, span, min(w / 4, 0.5 / om)
    raise DomainError(f"unknown force shape {shape!r}")


def analytic_profile(omega2: Mapping, force: Mapping | None = None,
                     tau_range: tuple[float, float] | None = None,
                     n_grid: int = 2001) -> FrequencyProfile:
    """Profile from named closed-form shapes.

    ``omega2`` shapes: ``constant`` (omega), ``step`` (omega_in, omega_out,
    tau0), ``tanh`` (omega_in, omega_out, T, tau0; tanh switch of
    ``Omega^2``), ``sech2`` (omega, amplitude, T, tau0; bump
    ``omega^2 (1 + A sech^2)``).  ``force`` shapes: ``none``,
    ``gaussian`` (amplitude, width, center), ``resonant`` (adds
    ``cos(omega (tau - center))``).  Without ``tau_range`` the range is
    chosen so that both functions are flat to double precision at the ends.
    """
    fn, wi, wo, bps, span, ms = _omega2_shape(dict(omega2))
    ffn, fspan, fms = _force_shape(dict(force) if force else None)
    if tau_range is None:
        lo, hi = span
        if fspan is not None:
            lo, hi = min(lo, fspan[0]), max(hi, fspan[1])
        tau_range = (lo, hi)
    lo, hi = map(float, tau_range)
    if not hi > lo:
        raise DomainError("empty tau range", tau_range=tau_range)
    grid = np.linspace(lo, hi, n_grid)
    grid = np.unique(np.concatenate([grid, [b for b in bps if lo < b < hi]]))
    max_step = min(ms, fms, 0.25 * 2 * math.pi / max(wi, wo))
    return FrequencyProfile(
        tau_grid=grid, omega2=fn(grid), omega_in=wi, omega_out=wo,
        force=np.zeros_like(grid) if ffn is None else ffn(grid), source="analytic-profile",
        omega2_fn=fn, force_fn=ffn, breakpoints=tuple(b for b in bps if lo < b < hi),
        max_step=max_step,
        meta={"omega2": dict(omega2), "force": dict(force) if force else {"shape": "none"}})


# -- path-derived profile ---------------------------------------------------------

def effective_frequency(path: ReactionPath, system=None, drive: Mapping | None = None
                        ) -> FrequencyProfile:
    """Effective oscillator frequency along the path, on its internal-time grid.

    ``Omega^2 = -(E_kin/p)^2 [p_vv/p + p_v^2/p^2 + 1/rho2^2 + p_uu/p + p_u^2/p^2]``.

    ``drive`` selects ``F(tau)``: ``None``/``{"model": "none"}`` gives no
    force; ``{"model": "curvature", "scale": s}`` the heuristic
    centrifugal-type term ``s (E_kin/p)^2 / rho1``; ``{"model":
    "analytic", ...}`` one of the closed-form force shapes.
    """
    p = path.p
    Ek = path.E_kin if system is None else system.E_kin_in
    bracket = (path.p_vv / p + path.p_v ** 2 / p ** 2 + path.inv_rho2 ** 2
               + path.p_uu / p + path.p_u ** 2 / p ** 2)
    om2 = -(Ek / p) ** 2 * bracket
    tau = path.tau
    bad = np.flatnonzero(om2 <= 0)
    if bad.size:
        raise TachyonicFrequency("Omega^2 is not positive", tau=float(tau[bad[0]]),
                                 omega2=float(om2[bad[0]]))
    spline = CubicSpline(tau, om2)
    t0, t1 = tau[0], tau[-1]
    om2_fn = lambda t: spline(np.clip(t, t0, t1))
    dtau_du = p * path.s_u / Ek
    p_spline = CubicHermiteSpline(tau, p, path.p_u / dtau_du)

    def momentum_fn(t):
        tc = np.clip(t, t0, t1)
        inside = (np.asarray(t) >= t0) & (np.asarray(t) <= t1)
        return p_spline(tc), np.where(inside, p_spline(tc, 1), 0.0)

    drive = dict(drive or {"model": "none"})
    model = drive.get("model", "none")
    force_fn, fms = None, np.inf
    if model == "curvature":
        vals = float(drive.get("scale", 1.0)) * (Ek / p) ** 2 * path.inv_rho1
        fs = CubicSpline(tau, vals)
        force_fn = lambda t: np.where((np.asarray(t) >= t0) & (np.asarray(t) <= t1),
                                      fs(np.clip(t, t0, t1)), 0.0)
    elif model == "analytic":
        force_fn, _, fms = _force_shape({k: v for k, v in drive.items() if k != "model"})
    elif model != "none":
        raise DomainError(f"unknown drive model {model!r}")
    wi, wo = math.sqrt(om2[0]), math.sqrt(om2[-1])
    max_step = min(fms, 0.25 * 2 * math.pi / math.sqrt(om2.max()),
                   4.0 * float(np.min(np.diff(tau))) * 50)
    return FrequencyProfile(
        tau_grid=tau.copy(), omega2=om2, omega_in=wi, omega_out=wo,
        force=np.zeros_like(tau) if force_fn is None else force_fn(tau), source="from-path",
        omega2_fn=om2_fn, force_fn=force_fn, max_step=max_step, momentum_fn=momentum_fn,
        meta={"drive": drive, "p_minus": float(p[0])})


def check_asymptotes(profile: FrequencyProfile, eps_asym: float = 1e-8) -> None:
    """Raise :class:`BadAsymptote` unless both tails are flat to ``eps_asym``."""
    t = profile.tau_grid
    n = max(2, t.size // 50)
    for label, idx, w in (("in", slice(0, n), profile.omega_in),
                          ("out", slice(t.size - n, t.size), profile.omega_out)):
        vals = profile.omega2_fn(t[idx])
        dev = float(np.max(np.abs(vals - w * w)) / (w * w))
        if dev > eps_asym:
            raise BadAsymptote(f"{label}-asymptote of Omega^2 not flat", deviation=dev,
                               eps_asym=eps_asym)


# -- xi ----------------------------------------------------------------------------

@dataclass(eq=False)
class DriveSolution:
    d_inf: complex
    _d: Callable = field(repr=False)
    _xi: Callable = field(repr=False)
    omega_in: float = 1.0

    def d(self, tau):
        return self._d(tau)

    def eta(self, tau):
        xi, _ = self._xi(tau)
        return math.sqrt(2.0 / self.omega_in) * np.imag(xi * np.conj(self._d(tau)))

    def eta_dot(self, tau):
        _, dxi = self._xi(tau)
        return math.sqrt(2.0 / self.omega_in) * np.imag(dxi * np.conj(self._d(tau)))


@dataclass(eq=False)
class OscillatorSolution:
    """Classical parametric-oscillator solution and its asymptotic constants."""

    profile: FrequencyProfile
    c1: complex
    c2: complex
    wronskian_drift: float
    sol: OdeSolution = field(repr=False)
    d_inf: complex = 0j
    drive: DriveSolution | None = None

    @property
    def theta(self) -> float:
        return abs(self.c2 / self.c1) ** 2

    @property
    def omega_in(self) -> float:
        return self.profile.omega_in

    @property
    def omega_out(self) -> float:
        return self.profile.omega_out

    def xi(self, tau):
        """``(xi, xi_dot)``; plane waves continue the solution beyond the range."""
        tau = np.asarray(tau, dtype=float)
        pr = self.profile
        tc = np.clip(tau, pr.tau_in, pr.tau_out)
        y = self.sol(tc)
        xi, dxi = y[0], y[1]
        wi, wo = pr.omega_in, pr.omega_out
        before, after = tau < pr.tau_in, tau > pr.tau_out
        if np.any(before):
            xi = np.where(before, np.exp(1j * wi * tau), xi)
            dxi = np.where(before, 1j * wi * np.exp(1j * wi * tau), dxi)
        if np.any(after):
            e = np.exp(1j * wo * tau)
            xi = np.where(after, self.c1 * e - self.c2 / e, xi)
            dxi = np.where(after, 1j * wo * (self.c1 * e + self.c2 / e), dxi)
        return xi, dxi

    def eta(self, tau):
        if self.drive is None:
            return np.zeros_like(np.asarray(tau, dtype=float))
        return self.drive.eta(tau)

    def eta_dot(self, tau):
        if self.drive is None:
            return np.zeros_like(np.asarray(tau, dtype=float))
        return self.drive.eta_dot(tau)


def _segments(profile):
    edges = [profile.tau_in, *sorted(profile.breakpoints), profile.tau_out]
    return list(zip(edges[:-1], edges[1:]))


def _merge(sols):
    ts = [sols[0].ts[0]]
    interps = []
    for s in sols:
        ts.extend(s.ts[1:])
        interps.extend(s.interpolants)
    return OdeSolution(np.array(ts), interps)


def solve_xi(profile: FrequencyProfile, tol: float = 1e-10, wronskian_tol: float = 1e-8,
             eps_asym: float = 1e-8) -> OscillatorSolution:
    """Integrate ``xi`` across the profile and extract ``c1``, ``c2``.

    Uses an embedded 8(5,3) Runge-Kutta pair with dense output, restarted
    at every profile breakpoint.

    Raises
    ------
    BadAsymptote
        if the profile tails are not flat to ``eps_asym``.
    IntegrationDrift
        if ``Im(xi' conj(xi))`` drifts from ``Omega_in`` by more than
        ``wronskian_tol`` (relative).
    """
    check_asymptotes(profile, eps_asym)
    wi, wo = profile.omega_in, profile.omega_out
    om2 = profile.omega2_fn

    def rhs(t, y):
        return np.array([y[1], -om2(t) * y[0]])

    t0 = profile.tau_in
    y = np.array([np.exp(1j * wi * t0), 1j * wi * np.exp(1j * wi * t0)])
    sols, drift = [], 0.0
    for a, b in _segments(profile):
        s = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=tol, atol=tol * 1e-3,
                      dense_output=True, max_step=profile.max_step)
        if s.status != 0:
            raise IntegrationDrift(f"xi integration failed: {s.message}", tau=float(s.t[-1]))
        w = np.imag(s.y[1] * np.conj(s.y[0]))
        drift = max(drift, float(np.max(np.abs(w - wi)) / wi))
        sols.append(s.sol)
        y = s.y[:, -1]
    if drift > wronskian_tol:
        raise IntegrationDrift("Wronskian drift above tolerance", drift=drift,
                               tolerance=wronskian_tol)
    t1 = profile.tau_out
    xi, dxi = y
    c1 = 0.5 * (xi + dxi / (1j * wo)) * np.exp(-1j * wo * t1)
    c2 = 0.5 * (dxi / (1j * wo) - xi) * np.exp(1j * wo * t1)
    return OscillatorSolution(profile=profile, c1=complex(c1), c2=complex(c2),
                              wronskian_drift=drift, sol=_merge(sols))


def solve_eta(profile: FrequencyProfile, solution: OscillatorSolution, tol: float = 1e-10,
              eps_force: float = 1e-8) -> DriveSolution:
    """Drive integral ``d(tau)`` and the forced trajectory ``eta(tau)``.

    ``d`` is accumulated by adaptive quadrature of ``xi F`` (as an ODE with
    state-independent right-hand side) over the same segments as ``xi``.
    """
    wi = profile.omega_in
    if profile.force_fn is None:
        zero = lambda t: np.zeros_like(np.asarray(t, dtype=float)) + 0j
        return DriveSolution(d_inf=0j, _d=zero, _xi=solution.xi, omega_in=wi)
    F = profile.force_fn
    scale = float(np.max(np.abs(profile.force))) or 1.0
    for end in (profile.tau_in, profile.tau_out):
        if abs(float(F(end))) > eps_force * scale:
            raise NonIntegrableDrive("drive does not decay in the asymptotic tails",
                                     tau=end, F=float(F(end)))
    norm = 1.0 / math.sqrt(2.0 * wi)

    def rhs(t, _):
        return [norm * solution.xi(t)[0] * F(t)]

    d = np.array([0j])
    sols = []
    atol = tol * 1e-3 * max(1.0, scale)
    for a, b in _segments(profile):
        s = solve_ivp(rhs, (a, b), d, method="DOP853", rtol=tol, atol=atol,
                      dense_output=True, max_step=profile.max_step)
        sols.append(s.sol)
        d = s.y[:, -1]
    merged = _merge(sols)
    t0, t1 = profile.tau_in, profile.tau_out
    d_inf = complex(d[0])
    d_fn = lambda t: merged(np.clip(t, t0, t1))[0]
    return DriveSolution(d_inf=d_inf, _d=d_fn, _xi=solution.xi, omega_in=wi)


def solve(profile: FrequencyProfile, tol: float = 1e-10, **kw) -> OscillatorSolution:
    """``solve_xi`` followed by ``solve_eta``; the drive is attached to the result."""
    sol = solve_xi(profile, tol=tol, **kw)
    drv = solve_eta(profile, sol, tol=tol)
    sol.drive = drv
    sol.d_inf = drv.d_inf
    return sol


def calibrate_drive(profile: FrequencyProfile, nu: float, tol: float = 1e-10
                    ) -> FrequencyProfile:
    """Rescale the drive so that ``|d_inf|^2`` equals ``nu`` (linearity in F)."""
    if profile.force_fn is None:
        raise DomainError("profile has no drive to calibrate")
    if nu < 0:
        raise DomainError("nu must be non-negative", nu=nu)
    base = solve(profile, tol=tol)
    nu0 = abs(base.d_inf) ** 2
    if nu0 == 0:
        raise DomainError("drive has no spectral weight on xi; cannot calibrate")
    return profile.scaled_force(math.sqrt(nu / nu0))


def write_profile_csv(profile: FrequencyProfile, solution: OscillatorSolution | None,
                      filename) -> None:
    """Dump ``tau, omega2, F, Re xi, Im xi`` on the profile grid."""
    t = profile.tau_grid
    if solution is not None:
        xi, _ = solution.xi(t)
    else:
        xi = np.full(t.shape, np.nan + 0j)
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "omega2", "F", "re_xi", "im_xi"])
        for row in zip(t, profile.omega2, profile.force, xi.real, xi.imag):
            w.writerow([format_float(v) for v in row])
