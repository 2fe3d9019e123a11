"""Reaction-path geometry, induced metric and local-frame motion.

The reaction path is a curve ``r(u)`` in the mass-scaled plane, ``u`` its
arc length and ``v`` the signed distance along the unit normal.  Along
it we tabulate the momentum ``p(u) = P(u, 0)`` with
``P(u, v) = sqrt(2 mu0 (E_kin - U(u, v)))`` and its first and second
partial derivatives.  Curvature radii follow from the momentum gradient,
``rho1 = -p / p_u`` and ``rho2 = -p / p_v``, and the metric of the
curvilinear frame is

    g11 = (1 + lambda1/rho1)**2,   g22 = (1 + v/rho2)**2,   g12 = 0,

with ``lambda1 = hbar / p``.  Internal time is
``tau(u) = (1/E_kin) * integral_0^u p(u') s_u(u') du'`` with the
arc-length factor ``s_u = 1 + lambda1/rho1``.

Energies are shifted so that ``U = 0`` at the in-channel end of the path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import (CubicHermiteSpline, CubicSpline, PchipInterpolator,
                               make_interp_spline)

from .errors import (CausticError, ClassicallyForbidden, DomainError, NoAsymptote,
                     StiffError)
from .pes import CollisionSystem, PotentialSurface, evaluate
from .tables import format_float

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


@dataclass(frozen=True)
class PathOptions:
    """How to trace the reaction path.

    ``method`` is ``"valley"`` (minimise the potential over ``y`` at fixed
    ``x``) or ``"steepest-descent"`` (descend from the saddle point both
    ways).  ``x_range`` bounds the traced curve; ``origin_x`` is where
    ``u = 0`` for the valley method (the saddle is the origin for
    steepest descent).
    """

    method: str = "valley"
    x_range: tuple[float, float] = (-20.0, 20.0)
    n_samples: int = 1601
    n_fine: int = 4001
    origin_x: float = 0.0
    saddle_guess: tuple[float, float] | None = None
    caustic_eps: float = 1e-6
    chart_threshold: float = 1.0
    asymptote_tol: float = 1e-8


@dataclass(frozen=True)
class QuasiclassicalReport:
    ratio1: np.ndarray          # lambda1 / |rho1|
    ratio2: np.ndarray          # lambda2 / |rho2|
    product: np.ndarray         # lambda1 lambda2 / |rho1 rho2|
    lambda2: np.ndarray
    v0: np.ndarray              # distance to the coordinate caustic, |rho2|
    lambda2_ok: np.ndarray      # lambda2 <= v0
    worst_ratio: float
    worst_u: float


@dataclass(frozen=True, eq=False)
class ReactionPath:
    """Sampled reaction path with momentum data and derived geometry.

    Arrays are aligned with ``u``.  Infinite curvature radii (straight,
    force-free stretches) are stored as ``inf``; the inverse radii
    ``inv_rho1``/``inv_rho2`` are finite everywhere and are what the
    numerics use.
    """

    u: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    p_u: np.ndarray
    p_v: np.ndarray
    p_uu: np.ndarray
    p_vv: np.ndarray
    p_uv: np.ndarray
    E_kin: float
    E: float
    mu0: float
    hbar: float = 1.0
    kappa: np.ndarray | None = None
    caustic_eps: float = 1e-6
    chart_threshold: float = 1.0
    # derived in __post_init__
    inv_rho1: np.ndarray = field(init=False)
    inv_rho2: np.ndarray = field(init=False)
    rho1: np.ndarray = field(init=False)
    rho2: np.ndarray = field(init=False)
    lambda1: np.ndarray = field(init=False)
    s_u: np.ndarray = field(init=False)
    tau: np.ndarray = field(init=False)
    charts: list = field(init=False)

    def __post_init__(self):
        set_ = object.__setattr__
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 1 or u.size < 4 or np.any(np.diff(u) <= 0):
            raise DomainError("path parameter u must be strictly increasing (>= 4 samples)")
        if not (u[0] <= 0.0 <= u[-1]):
            raise DomainError("path must contain the origin u = 0", u_min=u[0], u_max=u[-1])
        for name in ("x", "y", "p", "p_u", "p_v", "p_uu", "p_vv", "p_uv"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != u.shape:
                raise DomainError(f"path field {name} has wrong shape")
            set_(self, name, arr)
        set_(self, "u", u)
        if self.kappa is None:
            set_(self, "kappa", np.zeros_like(u))
        p = self.p
        if np.any(p <= 0):
            i = int(np.argmin(p))
            raise ClassicallyForbidden("momentum vanishes on the path", u=float(u[i]))

        inv1 = -self.p_u / p
        inv2 = -self.p_v / p
        with np.errstate(divide="ignore"):
            rho1 = np.where(self.p_u == 0.0, np.inf, -p / np.where(self.p_u == 0.0, 1.0, self.p_u))
            rho2 = np.where(self.p_v == 0.0, np.inf, -p / np.where(self.p_v == 0.0, 1.0, self.p_v))
        lam1 = self.hbar / p
        A = lam1 * inv1                      # lambda1 / rho1, exactly 0 when rho1 = inf
        A1 = -self.hbar * (self.p_uu / p ** 2 - 2.0 * self.p_u ** 2 / p ** 3)
        B1 = -(self.p_uv / p - self.p_v * self.p_u / p ** 2)
        s_u = 1.0 + A
        if np.any(s_u <= 0):
            i = int(np.argmin(s_u))
            raise DomainError("arc-length factor 1 + lambda1/rho1 is not positive "
                              "(quasiclassical condition grossly violated)", u=float(u[i]))
        set_(self, "inv_rho1", inv1)
        set_(self, "inv_rho2", inv2)
        set_(self, "rho1", rho1)
        set_(self, "rho2", rho2)
        set_(self, "lambda1", lam1)
        set_(self, "s_u", s_u)

        # Quintic (C4) interpolants feed the frame equations: a C1 Hermite
        # spline would put kinks in the right-hand side at every knot,
        # which adaptive step control does not see.
        set_(self, "_A", make_interp_spline(u, A, k=5))
        set_(self, "_B", make_interp_spline(u, inv2, k=5))
        set_(self, "_p", CubicHermiteSpline(u, p, self.p_u))
        f = p * s_u
        set_(self, "_tau_int", CubicHermiteSpline(u, f, self.p_u * s_u + p * A1).antiderivative())
        mu0 = self.mu0
        U0 = self.E_kin - p ** 2 / (2.0 * mu0)
        Uv = -p * self.p_v / mu0
        Uvv = -(self.p_v ** 2 + p * self.p_vv) / mu0
        Uuv = -(self.p_u * self.p_v + p * self.p_uv) / mu0
        set_(self, "_U0", make_interp_spline(u, U0, k=5))
        set_(self, "_Uv", make_interp_spline(u, Uv, k=5))
        set_(self, "_Uvv", make_interp_spline(u, Uvv, k=5))
        set_(self, "U_vv", Uvv)
        set_(self, "tau", self.internal_time(u))
        set_(self, "charts", _charts(u, rho2, self.chart_threshold))

    # -- sampled-function access -------------------------------------------------
    @property
    def u_min(self) -> float:
        return float(self.u[0])

    @property
    def u_max(self) -> float:
        return float(self.u[-1])

    @property
    def p_minus(self) -> float:
        return float(self.p[0])

    def _clamp(self, u):
        u = np.asarray(u, dtype=float)
        return np.clip(u, self.u[0], self.u[-1]), (u < self.u[0]) | (u > self.u[-1])

    def metric_functions(self, u):
        """``(A, A', B, B')`` with ``A = lambda1/rho1`` and ``B = 1/rho2``.

        Beyond the sampled range the tail values are continued as
        constants (asymptotic flatness).
        """
        uc, out = self._clamp(u)
        A, B = self._A(uc), self._B(uc)
        A1 = np.where(out, 0.0, self._A(uc, 1))
        B1 = np.where(out, 0.0, self._B(uc, 1))
        return A, A1, B, B1

    def momentum(self, u):
        uc, out = self._clamp(u)
        return self._p(uc), np.where(out, 0.0, self._p(uc, 1))

    def internal_time(self, u):
        """Internal time ``tau(u)``; linear continuation beyond the samples."""
        u = np.asarray(u, dtype=float)
        uc = np.clip(u, self.u[0], self.u[-1])
        F = self._tau_int
        tau = (F(uc) - F(0.0)) / self.E_kin
        lo, hi = self.p[0] * self.s_u[0], self.p[-1] * self.s_u[-1]
        tau = tau + np.where(u < uc, (u - uc) * lo, 0.0) / self.E_kin
        tau = tau + np.where(u > uc, (u - uc) * hi, 0.0) / self.E_kin
        return tau

    def transverse_potential(self, u, v):
        """Second-order expansion ``U(u, v)`` and its partials ``(U, U_u, U_v)``."""
        uc, out = self._clamp(u)
        U0, Uv, Uvv = self._U0(uc), self._Uv(uc), self._Uvv(uc)
        dU0 = np.where(out, 0.0, self._U0(uc, 1))
        dUv = np.where(out, 0.0, self._Uv(uc, 1))
        dUvv = np.where(out, 0.0, self._Uvv(uc, 1))
        U = U0 + Uv * v + 0.5 * Uvv * v * v
        return U, dU0 + dUv * v + 0.5 * dUvv * v * v, Uv + Uvv * v

    @classmethod
    def from_samples(cls, u, p, p_u=None, p_v=None, p_uu=None, p_vv=None, p_uv=None, *,
                     E_kin, E=None, mu0=1.0, hbar=1.0, x=None, y=None, **kw):
        """Build a path directly from momentum samples (missing derivatives are zero)."""
        u = np.asarray(u, dtype=float)
        z = np.zeros_like(u)
        arrs = [z if a is None else np.asarray(a, dtype=float) for a in (p_u, p_v, p_uu, p_vv, p_uv)]
        return cls(u=u, x=u.copy() if x is None else x, y=z if y is None else y,
                   p=np.broadcast_to(np.asarray(p, dtype=float), u.shape).copy(),
                   p_u=arrs[0], p_v=arrs[1], p_uu=arrs[2], p_vv=arrs[3], p_uv=arrs[4],
                   E_kin=E_kin, E=E_kin if E is None else E, mu0=mu0, hbar=hbar, **kw)


def _charts(u, rho2, threshold):
    tight = np.abs(rho2) < threshold
    edges = np.flatnonzero(np.diff(tight.astype(int))) + 1
    bounds = np.concatenate([[0], edges, [u.size - 1]])
    charts = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        kind = "high-curvature" if tight[a] else "regular"
        charts.append((float(u[a]), float(u[b]), kind))
    return charts


# -- path construction -----------------------------------------------------------

class _Curve:
    """Planar curve r(sigma) as cubic splines, with arc-length inversion."""

    def __init__(self, sx, sy, sigma):
        self.sx, self.sy = sx, sy
        self.sigma = sigma
        speed = lambda s: np.hypot(sx(s, 1), sy(s, 1))
        a, b = sigma[:-1], sigma[1:]
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
        seg = (speed(nodes) * _GL_W[None, :]).sum(axis=1) * half
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._speed = speed

    def arc(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        k = np.clip(np.searchsorted(self.sigma, s) - 1, 0, self.sigma.size - 2)
        a = self.sigma[k]
        half, mid = 0.5 * (s - a), 0.5 * (s + a)
        nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
        return self.cum[k] + (self._speed(nodes) * _GL_W[None, :]).sum(axis=1) * half

    def invert(self, arc):
        inv = PchipInterpolator(self.cum, self.sigma)
        s = inv(arc)
        for _ in range(3):
            s = s - (self.arc(s) - arc) / self._speed(s)
        return np.clip(s, self.sigma[0], self.sigma[-1])

    def frame(self, s):
        """Position, unit tangent, arc-length second derivative and curvature."""
        r = np.array([self.sx(s), self.sy(s)])
        d1 = np.array([self.sx(s, 1), self.sy(s, 1)])
        d2 = np.array([self.sx(s, 2), self.sy(s, 2)])
        sp = np.hypot(d1[0], d1[1])
        t = d1 / sp
        r_uu = (d2 - t * (t * d2).sum(axis=0)) / sp ** 2
        kappa = t[0] * r_uu[1] - t[1] * r_uu[0]
        return r, t, r_uu, kappa


def _valley_curve(surface, opt: PathOptions):
    xs = np.linspace(opt.x_range[0], opt.x_range[1], opt.n_fine)
    ys = np.empty_like(xs)
    dys = np.empty_like(xs)
    yg = 0.0
    for i, x in enumerate(xs):
        for _ in range(60):
            _, g, H = evaluate(surface, x, yg)
            if not H[1, 1] > 0:
                raise NoAsymptote("no transverse valley minimum", x=float(x), y=float(yg))
            step = g[1] / H[1, 1]
            yg -= step
            if abs(step) < 1e-14 * max(1.0, abs(yg)):
                break
        _, g, H = evaluate(surface, x, yg)
        ys[i] = yg
        dys[i] = -H[0, 1] / H[1, 1]
    sx = CubicHermiteSpline(xs, xs, np.ones_like(xs))
    sy = CubicHermiteSpline(xs, ys, dys)
    return _Curve(sx, sy, xs), float(opt.origin_x)


def _find_saddle(surface, guess):
    r = np.array(guess, dtype=float)
    for _ in range(100):
        _, g, H = evaluate(surface, r[0], r[1])
        step = np.linalg.solve(H, g)
        r = r - step
        if np.linalg.norm(step) < 1e-13:
            break
    _, g, H = evaluate(surface, r[0], r[1])
    w, vec = np.linalg.eigh(H)
    if not (w[0] < 0 < w[1]):
        raise NoAsymptote("no first-order saddle found", point=tuple(r))
    e = vec[:, 0]
    return r, (e if e[0] >= 0 else -e)


def _steepest_descent_curve(surface, opt: PathOptions):
    if opt.saddle_guess is None:
        raise DomainError("steepest-descent tracing needs saddle_guess")
    r0, e = _find_saddle(surface, opt.saddle_guess)
    x_lo, x_hi = opt.x_range

    def rhs(_, r):
        _, g, _ = evaluate(surface, r[0], r[1])
        n = np.hypot(g[0], g[1])
        return -g / n if n > 0 else np.zeros(2)

    def hit_lo(_, r):
        return r[0] - x_lo

    def hit_hi(_, r):
        return r[0] - x_hi

    def stall(_, r):
        _, g, _ = evaluate(surface, r[0], r[1])
        return np.hypot(g[0], g[1]) - 1e-10

    for ev in (hit_lo, hit_hi, stall):
        ev.terminal = True
    span = 4.0 * (x_hi - x_lo)
    branches = []
    for sign in (-1.0, 1.0):
        start = r0 + sign * 1e-4 * e
        sol = solve_ivp(rhs, (0.0, span), start, method="DOP853", rtol=1e-10, atol=1e-12,
                        events=(hit_lo, hit_hi, stall), max_step=(x_hi - x_lo) / 400)
        pts = sol.y.T
        if len(pts) > 1:
            t = pts[-1] - pts[-2]
            t /= np.linalg.norm(t)
            target = x_lo if sign < 0 else x_hi
            if abs(t[0]) > 1e-12 and (target - pts[-1, 0]) * sign > 1e-9:
                n_ext = 50
                ls = np.linspace(0, (target - pts[-1, 0]) / t[0], n_ext + 1)[1:]
                pts = np.vstack([pts, pts[-1] + ls[:, None] * t[None, :]])
        branches.append(pts)
    pts = np.vstack([branches[0][::-1], r0[None, :], branches[1]])
    chord = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    keep = np.concatenate([[True], np.diff(chord) > 1e-12])
    pts, chord = pts[keep], chord[keep]
    sx, sy = CubicSpline(chord, pts[:, 0]), CubicSpline(chord, pts[:, 1])
    curve = _Curve(sx, sy, chord)
    i0 = len(branches[0])
    return curve, None, float(chord[i0])


def trace_path(surface: PotentialSurface, system: CollisionSystem,
               options: PathOptions | None = None) -> ReactionPath:
    """Trace the reaction path and tabulate momentum derivatives along it.

    Raises
    ------
    ClassicallyForbidden
        if ``E_kin_in`` lies below the potential anywhere on the path.
    NoAsymptote
        if the path ends are not straight, force-free channels.
    """
    opt = options or PathOptions()
    if opt.method == "valley":
        curve, origin_x = _valley_curve(surface, opt)
        sigma0 = origin_x
    elif opt.method == "steepest-descent":
        curve, _, sigma0 = _steepest_descent_curve(surface, opt)
    else:
        raise DomainError(f"unknown path method {opt.method!r}")
    if not (curve.sigma[0] <= sigma0 <= curve.sigma[-1]):
        raise DomainError("path origin outside traced range", origin=sigma0)

    s_origin = float(curve.arc(sigma0)[0])
    total = curve.cum[-1]
    arcs = np.linspace(0.0, total, opt.n_samples)
    # put the origin exactly on a sample
    k = int(np.argmin(np.abs(arcs - s_origin)))
    arcs[k] = s_origin
    sig = curve.invert(arcs)
    sig[k] = sigma0
    u = curve.arc(sig) - s_origin
    u[k] = 0.0

    r, t, r_uu, kappa = curve.frame(sig)
    n = np.array([-t[1], t[0]])
    n_u = -kappa * t
    V, g, H = evaluate(surface, r[0], r[1])
    U = V - V[0]
    Hn = np.einsum("ij...,j...->i...", H, n)
    U_u = (g * t).sum(axis=0)
    U_v = (g * n).sum(axis=0)
    U_uu = np.einsum("i...,ij...,j...->...", t, H, t) + (g * r_uu).sum(axis=0)
    U_vv = (Hn * n).sum(axis=0)
    U_uv = (Hn * t).sum(axis=0) + (g * n_u).sum(axis=0)

    mu0 = system.mu0
    P2 = 2.0 * mu0 * (system.E_kin_in - U)
    if np.any(P2 <= 0):
        i = int(np.argmin(P2))
        raise ClassicallyForbidden("collision energy below the potential on the path "
                                   "(overbarrier assumption violated)",
                                   u=float(u[i]), E_kin=system.E_kin_in, U=float(U[i]))
    p = np.sqrt(P2)
    p_u, p_v = -mu0 * U_u / p, -mu0 * U_v / p
    p_uu = -mu0 * U_uu / p - p_u * p_u / p
    p_vv = -mu0 * U_vv / p - p_v * p_v / p
    p_uv = -mu0 * U_uv / p - p_u * p_v / p

    tol = opt.asymptote_tol
    for end in (0, -1):
        flat = (abs(p_u[end] / p[end]) < tol and abs(p_v[end] / p[end]) < tol
                and abs(kappa[end]) < tol)
        if not flat:
            raise NoAsymptote("path end is not an asymptotically flat channel",
                              u=float(u[end]), p_u=float(p_u[end]), p_v=float(p_v[end]),
                              kappa=float(kappa[end]))
    return ReactionPath(u=u, x=r[0], y=r[1], p=p, p_u=p_u, p_v=p_v, p_uu=p_uu, p_vv=p_vv,
                        p_uv=p_uv, E_kin=system.E_kin_in, E=system.E, mu0=mu0,
                        hbar=system.hbar, kappa=kappa, caustic_eps=opt.caustic_eps,
                        chart_threshold=opt.chart_threshold)


def quasiclassical_report(path: ReactionPath) -> QuasiclassicalReport:
    """Evaluate the quasiclassicality ratios along the path."""
    r1 = path.lambda1 * np.abs(path.inv_rho1)
    with np.errstate(divide="ignore", invalid="ignore"):
        omega_v = np.sqrt(np.where(path.U_vv > 0, path.U_vv / path.mu0, np.nan))
        lam2 = np.where(np.isfinite(omega_v), np.sqrt(path.hbar / (path.mu0 * omega_v)), np.inf)
    r2 = np.where(path.inv_rho2 == 0.0, 0.0, lam2 * np.abs(path.inv_rho2))
    prod = r1 * r2
    v0 = np.abs(path.rho2)
    worst = np.maximum(r1, r2)
    i = int(np.argmax(worst))
    return QuasiclassicalReport(ratio1=r1, ratio2=r2, product=prod, lambda2=lam2, v0=v0,
                                lambda2_ok=lam2 <= v0, worst_ratio=float(worst[i]),
                                worst_u=float(path.u[i]))


def internal_time(path: ReactionPath, u):
    """Internal time at path parameter ``u``."""
    _check_range(path, u)
    return path.internal_time(u)


def z_of(path: ReactionPath, u, v):
    """Scaled transverse coordinate ``z = p(u) v / sqrt(hbar E_kin)``."""
    _check_range(path, u)
    p, _ = path.momentum(u)
    return p * np.asarray(v, dtype=float) / math.sqrt(path.hbar * path.E_kin)


def _check_range(path, u):
    u = np.asarray(u, dtype=float)
    if np.any(u < path.u_min) or np.any(u > path.u_max):
        raise DomainError("u outside the path range", u_min=path.u_min, u_max=path.u_max)


# -- metric ----------------------------------------------------------------------

@dataclass(frozen=True)
class MetricPoint:
    g11: float
    g22: float
    det_g: float
    dg: np.ndarray          # dg[i, j, k] = d g_ij / d x^k
    christoffels: np.ndarray  # christoffels[k, i, j] = Gamma^k_ij
    g12: float = 0.0


def _metric_parts(path, u, v):
    A, A1, B, B1 = path.metric_functions(u)
    h = 1.0 + v * B
    g11, g22 = (1.0 + A) ** 2, h * h
    d11u = 2.0 * (1.0 + A) * A1
    d22u = 2.0 * h * v * B1
    d22v = 2.0 * h * B
    return h, g11, g22, d11u, d22u, d22v


def christoffel(g, dg):
    """Affine connection of a metric from its first partial derivatives.

    ``g`` is ``(n, n)``, ``dg[i, j, k] = d_k g_ij``; returns
    ``Gamma[k, i, j] = 0.5 g^{kl} (d_i g_lj + d_j g_il - d_l g_ij)``.
    """
    ginv = np.linalg.inv(g)
    term = (np.einsum("lji->lij", dg) + np.einsum("ilj->lij", dg) - np.einsum("ijl->lij", dg))
    return 0.5 * np.einsum("kl,lij->kij", ginv, term)


def metric_at(path: ReactionPath, u: float, v: float, eps: float | None = None) -> MetricPoint:
    """Metric components and Christoffel symbols at ``(u, v)``.

    Raises :class:`CausticError` when ``|1 + v/rho2|`` falls below
    ``eps`` (default: the path's ``caustic_eps``).
    """
    eps = path.caustic_eps if eps is None else eps
    if not (path.u_min <= u <= path.u_max):
        raise DomainError("u outside the path range", u=u)
    h, g11, g22, d11u, d22u, d22v = (float(q) for q in _metric_parts(path, u, v))
    if abs(h) <= eps:
        raise CausticError("metric degenerates at the caustic v = -rho2", u=u, v=v)
    g = np.array([[g11, 0.0], [0.0, g22]])
    dg = np.zeros((2, 2, 2))
    dg[0, 0, 0] = d11u
    dg[1, 1, 0] = d22u
    dg[1, 1, 1] = d22v
    return MetricPoint(g11=g11, g22=g22, det_g=g11 * g22, dg=dg, christoffels=christoffel(g, dg))


# -- frame motion ----------------------------------------------------------------

@dataclass(frozen=True)
class FrameState:
    t: float
    x1: float
    x2: float
    v1: float
    v2: float
    a_t: float = 0.0


@dataclass
class FrameTrajectory:
    t: np.ndarray
    y: np.ndarray            # rows: x1, x2, v1, v2
    a: np.ndarray
    sol: object
    mode: str
    caustic: bool = False
    turning_point: bool = False

    @property
    def truncated(self) -> bool:
        return self.caustic or self.turning_point

    def states(self) -> list[FrameState]:
        return [FrameState(float(t), *map(float, col), a_t=float(a))
                for t, col, a in zip(self.t, self.y.T, self.a)]

    def speed(self, path: ReactionPath) -> np.ndarray:
        _, g11, g22, *_ = _metric_parts(path, self.y[0], self.y[1])
        return np.sqrt(g11 * self.y[2] ** 2 + g22 * self.y[3] ** 2)


def _frame_rhs(path: ReactionPath, mode: str):
    mu0, E = path.mu0, path.E

    def accel(y):
        u, v, du, dv = y
        h, g11, g22, d11u, d22u, d22v = _metric_parts(path, u, v)
        G111 = d11u / (2.0 * g11)
        G122 = -d22u / (2.0 * g11)
        G212 = d22u / (2.0 * g22)
        G222 = d22v / (2.0 * g22)
        acc_u = -(G111 * du * du + G122 * dv * dv)
        acc_v = -(2.0 * G212 * du * dv + G222 * dv * dv)
        a = 0.0
        if mode == "energy":
            U, U_u, U_v = path.transverse_potential(u, v)
            P2 = 2.0 * mu0 * (E - U)
            # d/dt log P0 = -mu0 (grad U . xdot) / P0^2
            a = -mu0 * (U_u * du + U_v * dv) / P2
        return acc_u + a * du, acc_v + a * dv, a

    def rhs(_, y):
        au, av, _ = accel(y)
        return [y[2], y[3], au, av]

    return rhs, accel


def _initial_speed_fix(path, state: FrameState, mode: str):
    _, g11, g22, *_ = _metric_parts(path, state.x1, state.x2)
    speed = math.sqrt(g11 * state.v1 ** 2 + g22 * state.v2 ** 2)
    if not speed > 0:
        raise DomainError("initial frame speed must be positive")
    if mode != "energy":
        return np.array([state.x1, state.x2, state.v1, state.v2])
    U, _, _ = path.transverse_potential(state.x1, state.x2)
    P2 = 2.0 * path.mu0 * (path.E - U)
    if not P2 > 0:
        raise ClassicallyForbidden("frame starts outside the classically allowed region")
    scale = math.sqrt(P2) / path.mu0 / speed
    return np.array([state.x1, state.x2, state.v1 * scale, state.v2 * scale])


def integrate_frame(path: ReactionPath, initial: FrameState, t_end: float, tol: float = 1e-10,
                    mode: str = "energy", max_step: float = np.inf) -> FrameTrajectory:
    """Integrate the local-frame equation of motion on the path metric.

    ``x''^k + Gamma^k_ij x'^i x'^j = a(t) x'^k``.  In ``"energy"`` mode the
    speed follows ``P0(u, v)/mu0`` (classical energy conservation) and
    ``a = d/dt log P0``; the initial velocity is rescaled to that speed.
    ``"geodesic"`` mode sets ``a = 0``.

    The trajectory is truncated (flagged) on reaching a caustic or a
    classical turning point; step-size collapse raises :class:`StiffError`.
    """
    if mode not in ("energy", "geodesic"):
        raise DomainError(f"unknown frame mode {mode!r}")
    y0 = _initial_speed_fix(path, initial, mode)
    rhs, accel = _frame_rhs(path, mode)
    eps = path.caustic_eps

    def caustic(_, y):
        A, A1, B, B1 = path.metric_functions(y[0])
        return abs(1.0 + y[1] * B) - eps

    def turning(_, y):
        U, _, _ = path.transverse_potential(y[0], y[1])
        return path.E - U - 1e-12 * max(1.0, abs(path.E))

    caustic.terminal = True
    events = [caustic]
    if mode == "energy":
        turning.terminal = True
        events.append(turning)
    sol = solve_ivp(rhs, (initial.t, initial.t + t_end), y0, method="DOP853", rtol=tol,
                    atol=tol * 1e-2, dense_output=True, events=events, max_step=max_step)
    if sol.status == -1:
        raise StiffError(f"frame integration failed: {sol.message}", t=float(sol.t[-1]))
    a = np.array([accel(col)[2] for col in sol.y.T], dtype=float)
    hit_c = sol.t_events[0].size > 0
    hit_t = mode == "energy" and sol.t_events[1].size > 0
    return FrameTrajectory(t=sol.t, y=sol.y, a=a, sol=sol.sol, mode=mode,
                           caustic=hit_c, turning_point=hit_t)


@dataclass(frozen=True)
class DivergenceEstimate:
    exponent: float
    t_elapsed: float
    partial: bool
    log_growth: np.ndarray


def divergence_diagnostic(path: ReactionPath, initial: FrameState, delta0: float = 1e-8,
                          t_end: float = 100.0, n_intervals: int = 100, mode: str = "energy",
                          tol: float = 1e-11) -> DivergenceEstimate:
    """Mean logarithmic separation rate of two nearby frame trajectories.

    The companion trajectory starts ``delta0`` away in ``x2`` with the same
    velocity; the phase-space separation is renormalised back to
    ``delta0`` after each of ``n_intervals`` equal intervals.
    """
    if not delta0 > 0:
        raise DomainError("delta0 must be positive", delta0=delta0)
    ref = _initial_speed_fix(path, initial, mode)
    pert = ref.copy()
    pert[1] += delta0
    dt = t_end / n_intervals
    logs = []
    t = initial.t
    partial = False
    for _ in range(n_intervals):
        ends = []
        for y in (ref, pert):
            tr = _advance(path, y, t, dt, tol, mode)
            if tr is None:
                partial = True
                break
            ends.append(tr)
        if partial:
            break
        ref, new = ends
        diff = new - ref
        d = float(np.linalg.norm(diff))
        logs.append(math.log(d / delta0))
        pert = ref + diff * (delta0 / d)
        t += dt
    logs = np.array(logs)
    elapsed = len(logs) * dt
    exponent = float(logs.sum() / elapsed) if elapsed > 0 else float("nan")
    return DivergenceEstimate(exponent=exponent, t_elapsed=elapsed, partial=partial,
                              log_growth=logs)


def _advance(path, y, t, dt, tol, mode):
    rhs, _ = _frame_rhs(path, mode)
    sol = solve_ivp(rhs, (t, t + dt), y, method="DOP853", rtol=tol, atol=tol * 1e-2)
    if sol.status != 0:
        return None
    end = sol.y[:, -1]
    A, _, B, _ = path.metric_functions(end[0])
    if abs(1.0 + end[1] * B) <= path.caustic_eps:
        return None
    return end


def write_path_csv(path: ReactionPath, filename) -> None:
    """Dump path samples with internal time and quasiclassical ratios."""
    rep = quasiclassical_report(path)
    cols = ["u", "x", "y", "p", "rho1", "rho2", "lambda1", "tau", "ratio1", "ratio2"]
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in zip(path.u, path.x, path.y, path.p, path.rho1, path.rho2,
                       path.lambda1, path.tau, rep.ratio1, rep.ratio2):
            w.writerow([format_float(v) for v in row])
