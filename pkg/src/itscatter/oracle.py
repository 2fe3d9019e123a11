"""Direct grid propagation of the reduced transverse equation.

Solves, in scaled units (``hbar = 1``, unit mass, coordinates ``(z, tau)``)::

    i dpsi/dtau = [-1/2 d^2/dz^2 + Omega(tau)^2 z^2 / 2 - F(tau) z] psi

with a symmetric (Strang) split-operator Fourier scheme, which is unitary
to round-off and second order in the step.  Transition probabilities are
the squared overlaps of the propagated in-channel eigenstates with the
out-channel eigenstates.  Nothing here uses the closed-form amplitudes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .amplitudes import TransitionMatrix
from .errors import DomainError, GridTooSmall, NonunitaryStep
from .oscillator import FrequencyProfile
from .tables import format_float

BOUNDARY_TOL = 1e-10
NORM_TOL = 1e-6


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on ``[-half_width, half_width)``.

    ``half_width=None`` selects ``12 / sqrt(Omega_min)`` for the profile.
    """

    half_width: float | None = None
    n_points: int = 2048

    def resolve(self, profile: FrequencyProfile) -> "GridSpec":
        if self.half_width is not None:
            return self
        om_min = math.sqrt(float(np.min(profile.omega2)))
        om_min = min(om_min, profile.omega_in, profile.omega_out)
        return GridSpec(12.0 / math.sqrt(om_min), self.n_points)

    @property
    def z(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.n_points, endpoint=False)

    @property
    def dz(self) -> float:
        return 2.0 * self.half_width / self.n_points


@dataclass(eq=False)
class GridWavefunction:
    """Propagated state(s); ``values`` has shape ``(n_states, N)``."""

    z_grid: np.ndarray
    values: np.ndarray
    tau: float
    n_in: tuple
    norm_drift: float = 0.0
    boundary_max: float = 0.0
    snapshots: list = field(default_factory=list, repr=False)

    @property
    def norm(self) -> np.ndarray:
        dz = self.z_grid[1] - self.z_grid[0]
        return np.sum(np.abs(self.values) ** 2, axis=-1) * dz


def eigenstates(omega: float, n_max: int, z: np.ndarray, check: bool = True) -> np.ndarray:
    """Hermite functions ``phi_0..phi_n_max`` of frequency ``omega`` on ``z``.

    Built by the stable three-term recurrence; with ``check`` the discrete
    Gram matrix must equal the identity to 1e-10.
    """
    out = np.zeros((n_max + 1, z.size))
    out[0] = (omega / math.pi) ** 0.25 * np.exp(-0.5 * omega * z * z)
    x = math.sqrt(2.0 * omega) * z
    if n_max > 0:
        out[1] = x * out[0]
    for j in range(1, n_max):
        out[j + 1] = (x * out[j] - math.sqrt(j) * out[j - 1]) / math.sqrt(j + 1)
    if check:
        dz = z[1] - z[0]
        gram = out @ out.T * dz
        dev = float(np.max(np.abs(gram - np.eye(n_max + 1))))
        if dev > 1e-10:
            raise GridTooSmall("eigenstates not orthonormal on grid", deviation=dev,
                               omega=omega, n_max=n_max)
    return out


def default_dt(profile: FrequencyProfile) -> float:
    """Step with ``Omega_max * dt <= 0.01``."""
    return 0.01 / math.sqrt(float(np.max(profile.omega2)))


def _boundary(psi, width):
    return float(max(np.max(np.abs(psi[..., :width])), np.max(np.abs(psi[..., -width:]))))


def propagate(profile: FrequencyProfile, n_in, grid: GridSpec | None = None,
              dt: float | None = None, snapshot_stride: int = 0,
              check_every: int = 200) -> GridWavefunction:
    """Propagate in-channel eigenstate(s) ``n_in`` from ``tau_in`` to ``tau_out``.

    ``n_in`` may be an int or a sequence; states are propagated together.
    Steps are uniform within each segment between profile breakpoints, the
    potential being sampled at step midpoints.

    Raises
    ------
    GridTooSmall
        if ``|psi|`` exceeds 1e-10 at the grid edges.
    NonunitaryStep
        if any norm drifts by more than 1e-6.
    """
    grid = (grid or GridSpec()).resolve(profile)
    dt = default_dt(profile) if dt is None else float(dt)
    if not dt > 0:
        raise DomainError("dt must be positive", dt=dt)
    states = (int(n_in),) if np.isscalar(n_in) else tuple(int(n) for n in n_in)
    if min(states) < 0:
        raise DomainError("n_in must be non-negative")
    z = grid.z
    dz = grid.dz
    k = 2.0 * math.pi * sfft.fftfreq(z.size, dz)
    psi = eigenstates(profile.omega_in, max(states), z)[list(states)].astype(complex)
    norm0 = np.sum(np.abs(psi) ** 2, axis=1) * dz
    edge = max(1, z.size // 100)
    F = profile.force_fn
    om2 = profile.omega2_fn
    z2 = 0.5 * z * z
    snaps = []
    boundary = _boundary(psi, edge)
    edges = [profile.tau_in, *sorted(profile.breakpoints), profile.tau_out]
    step = 0
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(1, int(math.ceil((b - a) / dt - 1e-9)))
        h = (b - a) / n
        Kh = np.exp(-0.25j * k * k * h)
        Kf = Kh * Kh
        tm = a + (np.arange(n) + 0.5) * h
        om2m = om2(tm)
        Fm = F(tm) if F is not None else np.zeros(n)
        psi = sfft.ifft(Kh * sfft.fft(psi, axis=1), axis=1)
        for s in range(n):
            psi *= np.exp(-1j * h * (om2m[s] * z2 - Fm[s] * z))
            psi = sfft.fft(psi, axis=1)
            psi *= Kf if s < n - 1 else Kh
            psi = sfft.ifft(psi, axis=1)
            step += 1
            if step % check_every == 0:
                boundary = max(boundary, _boundary(psi, edge))
                if boundary > BOUNDARY_TOL:
                    raise GridTooSmall("wavefunction reached the grid edge",
                                       tau=float(tm[s]), amplitude=boundary)
            if snapshot_stride and step % snapshot_stride == 0:
                snaps.append((float(tm[s] + 0.5 * h), psi.copy()))
    boundary = max(boundary, _boundary(psi, edge))
    if boundary > BOUNDARY_TOL:
        raise GridTooSmall("wavefunction reached the grid edge", tau=profile.tau_out,
                           amplitude=boundary)
    norm1 = np.sum(np.abs(psi) ** 2, axis=1) * dz
    drift = float(np.max(np.abs(norm1 - norm0) / norm0))
    if drift > NORM_TOL:
        raise NonunitaryStep("norm not conserved", drift=drift)
    return GridWavefunction(z, psi, profile.tau_out, states, drift, boundary, snaps)


def overlap_matrix(profile: FrequencyProfile, n_max: int, n_rows: int | None = None,
                   grid: GridSpec | None = None, dt: float | None = None) -> np.ndarray:
    """Amplitudes ``S[m, n] = <phi_m^out | psi_n(tau_out)>``, ``m <= n_rows``, ``n <= n_max``."""
    n_rows = n_max + 20 if n_rows is None else n_rows
    wf = propagate(profile, range(n_max + 1), grid, dt)
    out = eigenstates(profile.omega_out, n_rows, wf.z_grid)
    dz = wf.z_grid[1] - wf.z_grid[0]
    return out @ wf.values.T * dz


def oracle_matrix(profile: FrequencyProfile, n_max: int, grid: GridSpec | None = None,
                  dt: float | None = None, n_rows: int | None = None) -> TransitionMatrix:
    """Transition probabilities ``|S_mn|^2`` by grid propagation and projection.

    Rows beyond ``n_max`` (up to ``n_rows``) are projected as well and
    reported as the truncation tail of each column.
    """
    if n_max < 0:
        raise DomainError("n_max must be non-negative", n_max=n_max)
    S = overlap_matrix(profile, n_max, n_rows, grid, dt)
    P = np.abs(S) ** 2
    W = P[:n_max + 1].copy()
    return TransitionMatrix(n_max, W, "oracle", None, P[n_max + 1:].sum(axis=0),
                            meta={"grid_points": (grid or GridSpec()).n_points,
                                  "dt": dt if dt is not None else default_dt(profile)})


def write_snapshots_csv(wf: GridWavefunction, filename, state: int = 0) -> None:
    """Dump ``tau, z, Re psi, Im psi`` for the recorded snapshots."""
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "z", "re_psi", "im_psi"])
        for tau, psi in wf.snapshots:
            for zz, v in zip(wf.z_grid, psi[state]):
                w.writerow([format_float(tau), format_float(zz), format_float(v.real),
                            format_float(v.imag)])
