"""Collision system and model potential energy surfaces.

Coordinates are the mass-scaled (Delves-Smith) Cartesian pair ``(x, y)``
in which the kinetic energy is isotropic with mass ``mu0``.  All
quantities are in model units with ``hbar`` carried explicitly.

Three surface families are provided:

``flat-channel``
    ``V = 0.5 * omega**2 * (y - y0)**2``; a straight channel, x-independent.
``two-channel-harmonic``
    ``V = B(x) + 0.5 * mu0 * omega(x)**2 * (y - c(x))**2`` where ``omega``
    switches from ``omega_in`` to ``omega_out`` through a tanh sigmoid,
    ``B`` is an optional Eckart (sech^2) bump plus an optional asymptotic
    shift, and ``c`` an optional smooth bend of the valley floor.
``custom-tabulated``
    bicubic spline through gridded values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import DomainError

FAMILIES = ("flat-channel", "two-channel-harmonic", "custom-tabulated")


def reduced_mass(mA: float, mB: float, mC: float) -> float:
    """Three-body reduced mass ``sqrt(mA*mB*mC / (mA+mB+mC))``."""
    for name, m in (("mA", mA), ("mB", mB), ("mC", mC)):
        if not m > 0:
            raise DomainError("masses must be positive", **{name: m})
    return math.sqrt(mA * mB * mC / (mA + mB + mC))


@dataclass(frozen=True)
class CollisionSystem:
    """Masses and energies of a collinear A + BC collision.

    ``E`` is the total energy and ``E_kin_in`` the initial translational
    energy; the overbarrier reduction needs ``0 < E_kin_in <= E``.
    """

    mA: float
    mB: float
    mC: float
    E: float
    E_kin_in: float
    hbar: float = 1.0
    mu0: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mu0", reduced_mass(self.mA, self.mB, self.mC))
        if not self.E_kin_in > 0:
            raise DomainError("E_kin_in must be positive", E_kin_in=self.E_kin_in)
        if self.E_kin_in > self.E:
            raise DomainError("E_kin_in exceeds total energy", E_kin_in=self.E_kin_in, E=self.E)
        if not self.hbar > 0:
            raise DomainError("hbar must be positive", hbar=self.hbar)

    @property
    def p_minus(self) -> float:
        """Asymptotic in-channel momentum ``sqrt(2 mu0 E_kin_in)``."""
        return math.sqrt(2.0 * self.mu0 * self.E_kin_in)

    def with_energy(self, E_kin_in: float) -> "CollisionSystem":
        """Same system at a different collision energy, keeping ``E - E_kin_in``."""
        return CollisionSystem(self.mA, self.mB, self.mC,
                               E=self.E - self.E_kin_in + E_kin_in,
                               E_kin_in=E_kin_in, hbar=self.hbar)


# sigmoid and sech^2 with first/second derivatives
def _sigmoid(s):
    t = np.tanh(s)
    sech2 = 1.0 - t * t
    return 0.5 * (1.0 + t), 0.5 * sech2, -sech2 * t


def _sech2(s):
    t = np.tanh(s)
    f = 1.0 - t * t
    return f, -2.0 * f * t, 4.0 * f * t * t - 2.0 * f * f


@dataclass(frozen=True)
class PotentialSurface:
    """An immutable model surface ``V(x, y)`` with exact derivatives.

    Build instances with :func:`make_surface`; ``evaluate`` returns the
    value, gradient and Hessian at a point (or broadcast arrays of points).
    """

    family: str
    params: Mapping[str, Any]
    _impl: Any = field(repr=False, compare=False)

    def evaluate(self, x, y):
        return evaluate(self, x, y)

    def value(self, x, y):
        return evaluate(self, x, y)[0]


def make_surface(family: str, params: Mapping[str, Any] | None = None,
                 system: CollisionSystem | None = None) -> PotentialSurface:
    """Construct a surface of the named family.

    ``two-channel-harmonic`` needs ``mu0``; it is taken from ``system``
    when not given in ``params``.
    """
    params = dict(params or {})
    if family == "flat-channel":
        impl = _FlatChannel(**params)
    elif family == "two-channel-harmonic":
        if "mu0" not in params:
            if system is None:
                raise DomainError("two-channel-harmonic needs mu0 or a CollisionSystem")
            params["mu0"] = system.mu0
        impl = _TwoChannel(**params)
    elif family == "custom-tabulated":
        impl = _Tabulated(**params)
    else:
        raise DomainError(f"unknown surface family {family!r}", known=FAMILIES)
    return PotentialSurface(family, MappingProxyType(params), impl)


def evaluate(surface: PotentialSurface, x, y):
    """Value, gradient and Hessian of ``surface`` at ``(x, y)``.

    Returns
    -------
    V : float or ndarray
    grad : ndarray, shape (2, ...)
    hess : ndarray, shape (2, 2, ...), symmetric
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    surface._impl.check_domain(x, y)
    V, gx, gy, hxx, hxy, hyy = surface._impl(x, y)
    grad = np.array([gx, gy])
    hess = np.array([[hxx, hxy], [hxy, hyy]])
    if not np.all(np.isfinite(V)):
        raise DomainError("surface value not finite", family=surface.family)
    if V.ndim == 0:
        return float(V), grad, hess
    return V, grad, hess


class _Analytic:
    domain = None

    def check_domain(self, x, y):
        if self.domain is None:
            return
        (x0, x1), (y0, y1) = self.domain
        if np.any((x < x0) | (x > x1) | (y < y0) | (y > y1)):
            raise DomainError("point outside surface domain", domain=self.domain)


class _FlatChannel(_Analytic):
    def __init__(self, omega, y0=0.0, domain=None):
        if not omega > 0:
            raise DomainError("flat-channel omega must be positive", omega=omega)
        self.omega = float(omega)
        self.y0 = float(y0)
        self.domain = domain

    def __call__(self, x, y):
        k = self.omega ** 2
        e = y - self.y0
        zero = np.zeros(np.broadcast(x, y).shape)
        return 0.5 * k * e * e + zero, zero, k * e + zero, zero, zero, k + zero


class _TwoChannel(_Analytic):
    def __init__(self, omega_in, omega_out, mu0, switch_length=1.0, switch_center=0.0,
                 barrier_height=0.0, barrier_width=1.0, barrier_center=0.0,
                 asymptote_shift=0.0, bend_height=0.0, bend_length=1.0,
                 bend_center=0.0, domain=None):
        if not (omega_in > 0 and omega_out > 0):
            raise DomainError("channel frequencies must be positive",
                              omega_in=omega_in, omega_out=omega_out)
        if not (switch_length > 0 and barrier_width > 0 and bend_length > 0):
            raise DomainError("length scales must be positive")
        self.omega_in = float(omega_in)
        self.omega_out = float(omega_out)
        self.mu0 = float(mu0)
        self.L = float(switch_length)
        self.xs = float(switch_center)
        self.V0 = float(barrier_height)
        self.a = float(barrier_width)
        self.xb = float(barrier_center)
        self.dV = float(asymptote_shift)
        self.h = float(bend_height)
        self.Lc = float(bend_length)
        self.xc = float(bend_center)
        self.domain = domain

    def __call__(self, x, y):
        mu0 = self.mu0
        sg, sg1, sg2 = _sigmoid((x - self.xs) / self.L)
        dw = self.omega_out - self.omega_in
        om = self.omega_in + dw * sg
        om1 = dw * sg1 / self.L
        om2 = dw * sg2 / self.L ** 2
        W, W1, W2 = om * om, 2.0 * om * om1, 2.0 * (om1 * om1 + om * om2)

        f, f1, f2 = _sech2((x - self.xb) / self.a)
        B = self.V0 * f + self.dV * sg
        B1 = self.V0 * f1 / self.a + self.dV * sg1 / self.L
        B2 = self.V0 * f2 / self.a ** 2 + self.dV * sg2 / self.L ** 2

        cs, cs1, cs2 = _sigmoid((x - self.xc) / self.Lc)
        c, c1, c2 = self.h * cs, self.h * cs1 / self.Lc, self.h * cs2 / self.Lc ** 2

        e = y - c
        V = B + 0.5 * mu0 * W * e * e
        Vx = B1 + 0.5 * mu0 * W1 * e * e - mu0 * W * e * c1
        Vy = mu0 * W * e
        Vxx = (B2 + 0.5 * mu0 * W2 * e * e - 2.0 * mu0 * W1 * e * c1
               + mu0 * W * c1 * c1 - mu0 * W * e * c2)
        Vxy = mu0 * W1 * e - mu0 * W * c1
        Vyy = mu0 * W + 0.0 * e
        return V, Vx, Vy, Vxx, Vxy, Vyy


class _Tabulated:
    def __init__(self, x, y, values):
        xg = np.asarray(x, dtype=float)
        yg = np.asarray(y, dtype=float)
        Z = np.asarray(values, dtype=float)
        if Z.shape != (xg.size, yg.size):
            raise DomainError("tabulated values must have shape (len(x), len(y))",
                              shape=Z.shape)
        if xg.size < 4 or yg.size < 4:
            raise DomainError("bicubic spline needs at least 4 points per axis")
        self.spline = RectBivariateSpline(xg, yg, Z, kx=3, ky=3, s=0)
        self.domain = ((xg[0], xg[-1]), (yg[0], yg[-1]))

    def check_domain(self, x, y):
        (x0, x1), (y0, y1) = self.domain
        if np.any((x < x0) | (x > x1) | (y < y0) | (y > y1)):
            raise DomainError("point outside tabulated grid", domain=self.domain)

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(x, y)
        ev = self.spline.ev
        out = [ev(x, y), ev(x, y, dx=1), ev(x, y, dy=1),
               ev(x, y, dx=2), ev(x, y, dx=1, dy=1), ev(x, y, dy=2)]
        return tuple(np.asarray(o).reshape(x.shape) for o in out)
