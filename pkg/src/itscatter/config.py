"""Scenario files.

A scenario is a JSON object::

    {
      "name": "two-channel",
      "system": {"mA": 1, "mB": 1, "mC": 1, "E": 2.5, "E_kin_in": 2.0},
      "surface": {"family": "two-channel-harmonic", "params": {...}},
      "path": {"method": "valley", "x_range": [-45, 45]},
      "profile": {"source": "from-path", "drive": {"model": "none"}},
      "modes": ["hermite", "legendre", "oracle"],
      "n_max": 6,
      "sweep": {"energies": [1.5, 2.0]}  or  {"range": [1.0, 3.0, 8]},
      "tolerances": {...},
      "oracle": {"n_points": 2048, "half_width": null, "dt": null},
      "output_dir": "out"
    }

``profile.source = "analytic-profile"`` takes ``omega2`` and ``force``
shape objects (see :func:`itscatter.oscillator.analytic_profile`), an
optional ``tau_range`` and an optional ``nu`` to which the drive is
calibrated; ``system``, ``surface`` and ``path`` may then be omitted.
Errors name the line of the offending key.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .amplitudes import MODES
from .errors import ConfigError, ScatteringError
from .geometry import PathOptions
from .pes import FAMILIES, CollisionSystem

DEFAULT_TOLERANCES = {
    "ode_rtol": 1e-10,       # xi and d integrations
    "wronskian": 1e-8,       # allowed relative Wronskian drift
    "eps_asym": 1e-8,        # flatness of Omega^2 tails
    "constants": 1e-6,       # Wronskian check when extracting parameters
}
DEFAULT_ORACLE = {"n_points": 2048, "half_width": None, "dt": None}
TOP_KEYS = {"name", "system", "surface", "path", "profile", "modes", "n_max", "sweep",
            "tolerances", "oracle", "output_dir", "description"}


@dataclass(frozen=True)
class Scenario:
    name: str
    profile: dict
    modes: tuple
    n_max: int
    system: CollisionSystem | None = None
    surface: dict | None = None
    path: PathOptions | None = None
    energies: tuple = ()
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    oracle: dict = field(default_factory=lambda: dict(DEFAULT_ORACLE))
    output_dir: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def from_path(self) -> bool:
        return self.profile.get("source") == "from-path"


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(r'"%s"\s*:' % re.escape(key))
    for i, line in enumerate(text.splitlines(), 1):
        if pat.search(line):
            return i
    return None


class _Checker:
    def __init__(self, text):
        self.text = text

    def fail(self, key, message, **ctx):
        raise ConfigError(message, line=_line_of(self.text, key), key=key, **ctx)

    def get(self, obj, key, kind, required=True, default=None):
        if key not in obj:
            if required:
                raise ConfigError(f"missing required key {key!r}", line=None, key=key)
            return default
        val = obj[key]
        if kind is float and isinstance(val, bool) or not isinstance(val, kind):
            self.fail(key, f"{key!r} must be {getattr(kind, '__name__', kind)}")
        return val


def energies_from_spec(spec) -> list[float]:
    """Energies from ``{"energies": [...]}`` or ``{"range": [start, stop, count]}``."""
    if spec is None:
        return []
    if "energies" in spec:
        return [float(e) for e in spec["energies"]]
    if "range" in spec:
        start, stop, count = spec["range"]
        return [float(e) for e in np.linspace(float(start), float(stop), int(count))]
    raise ConfigError("sweep needs 'energies' or 'range'")


def parse_energies(arg: str) -> list[float]:
    """Command-line energies: ``"1,1.5,2"`` or ``"start:stop:count"`` (inclusive)."""
    arg = arg.strip()
    if not arg:
        return []
    if ":" in arg:
        parts = arg.removeprefix("range:").split(":")
        if len(parts) != 3:
            raise ConfigError("range must be start:stop:count")
        return [float(e) for e in np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))]
    return [float(e) for e in arg.split(",") if e.strip()]


def parse_scenario(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a JSON object", line=1)
    ck = _Checker(text)
    for key in raw:
        if key not in TOP_KEYS:
            ck.fail(key, f"unknown key {key!r}")
    name = ck.get(raw, "name", str, required=False, default="scenario")
    profile = ck.get(raw, "profile", dict)
    source = profile.get("source")
    if source not in ("from-path", "analytic-profile"):
        ck.fail("source", "profile.source must be 'from-path' or 'analytic-profile'",
                source=source)
    modes = ck.get(raw, "modes", list)
    for m in modes:
        if m not in MODES:
            ck.fail("modes", f"unknown mode {m!r}", known=MODES)
    n_max = ck.get(raw, "n_max", int)
    if n_max < 0:
        ck.fail("n_max", "n_max must be non-negative")

    system = surface = path = None
    if "system" in raw or source == "from-path":
        s = ck.get(raw, "system", dict)
        try:
            system = CollisionSystem(**{k: float(v) for k, v in s.items()})
        except TypeError as exc:
            ck.fail("system", f"bad system entry: {exc}")
        except ScatteringError as exc:
            ck.fail("system", str(exc))
    if source == "from-path":
        surface = ck.get(raw, "surface", dict)
        if surface.get("family") not in FAMILIES:
            ck.fail("family", f"unknown surface family {surface.get('family')!r}",
                    known=FAMILIES)
        p = dict(ck.get(raw, "path", dict, required=False, default={}))
        for k in ("x_range", "saddle_guess"):
            if p.get(k) is not None:
                p[k] = tuple(float(v) for v in p[k])
        try:
            path = PathOptions(**p)
        except TypeError as exc:
            ck.fail("path", f"bad path option: {exc}")
    else:
        if "omega2" not in profile:
            ck.fail("profile", "analytic-profile needs an 'omega2' shape")

    energies = []
    if "sweep" in raw:
        sw = ck.get(raw, "sweep", dict)
        try:
            energies = energies_from_spec(sw)
        except (TypeError, ValueError) as exc:
            ck.fail("sweep", f"bad sweep: {exc}")
    for e in energies:
        if not e > 0:
            ck.fail("sweep", "sweep energies must be positive", energy=e)

    tol = dict(DEFAULT_TOLERANCES)
    for k, v in ck.get(raw, "tolerances", dict, required=False, default={}).items():
        if k not in tol:
            ck.fail(k, f"unknown tolerance {k!r}")
        tol[k] = float(v)
    orc = dict(DEFAULT_ORACLE)
    for k, v in ck.get(raw, "oracle", dict, required=False, default={}).items():
        if k not in orc:
            ck.fail(k, f"unknown oracle option {k!r}")
        orc[k] = v
    return Scenario(name=name, profile=copy.deepcopy(profile), modes=tuple(modes),
                    n_max=n_max, system=system, surface=copy.deepcopy(surface), path=path,
                    energies=tuple(energies), tolerances=tol, oracle=orc,
                    output_dir=raw.get("output_dir"), raw=raw)


def load_scenario(filename) -> Scenario:
    text = Path(filename).read_text()
    return parse_scenario(text)


def set_parameter(raw: dict, key: str, value: Any) -> dict:
    """Copy of a raw scenario with the dotted ``key`` set, e.g. ``profile.omega2.T``."""
    out = copy.deepcopy(raw)
    node = out
    parts = key.split(".")
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"parameter path {key!r} does not exist")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"parameter path {key!r} does not exist")
    node[parts[-1]] = value
    return out
