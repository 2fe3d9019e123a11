"""Scenario execution: single points, sweeps, manifests.

Each point is an independent unit (surface, path, profile, oscillator,
matrices) that writes into its own directory and returns a summary
record.  Aggregation is done afterwards in input order, so output is the
same for any number of workers.
"""

from __future__ import annotations

import json
import math
import platform
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .amplitudes import (assemble_matrix, extract_parameters, write_matrix_csv)
from .config import Scenario, parse_scenario, set_parameter
from .errors import ScatteringError
from .geometry import trace_path, write_path_csv
from .oracle import GridSpec, oracle_matrix, overlap_matrix
from .oscillator import (ETA_CONVENTION, analytic_profile, calibrate_drive,
                         effective_frequency, solve, write_profile_csv)
from .pes import make_surface
from .tables import write_rows

SUMMARY_HEADER = ["E_k", "theta", "W_00", "unitarity_defect", "max_mode_discrepancy",
                  "nu", "status", "message"]
ARBITRATION_NUS = (0.25, 1.0)
ARBITRATION_RTOL = 1e-3
# columns this far below n_max are excluded from the reported defect
TRUNCATION_MARGIN = 4


@dataclass(frozen=True)
class PointTask:
    index: int
    energy: float | None
    raw: dict
    out_dir: str | None
    convention: str
    param: tuple | None = None


def build_profile(sc: Scenario, energy: float | None):
    """Profile (and traced path, if any) for a scenario at one energy."""
    prof = sc.profile
    path = None
    if sc.from_path:
        system = sc.system if energy is None else sc.system.with_energy(energy)
        surface = make_surface(sc.surface["family"], sc.surface.get("params"), system)
        path = trace_path(surface, system, sc.path)
        profile = effective_frequency(path, system, prof.get("drive"))
    else:
        profile = analytic_profile(prof["omega2"], prof.get("force"),
                                   tuple(prof["tau_range"]) if "tau_range" in prof else None)
    if prof.get("nu") is not None and profile.driven:
        profile = calibrate_drive(profile, float(prof["nu"]), tol=sc.tolerances["ode_rtol"])
    return profile, path


def _oracle_grid(sc):
    o = sc.oracle
    return GridSpec(o.get("half_width"), int(o.get("n_points") or 2048)), o.get("dt")


def compute_point(task: PointTask) -> dict:
    """Run one point; never raises for library errors (they go into the record)."""
    sc = parse_scenario(json.dumps(task.raw))
    rec = {"index": task.index, "E_k": task.energy, "theta": math.nan, "W_00": math.nan,
           "unitarity_defect": math.nan, "max_mode_discrepancy": math.nan, "nu": math.nan,
           "status": "ok", "message": "", "warnings": []}
    if task.param is not None:
        rec["param"] = task.param[1]
    out = Path(task.out_dir) if task.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    tol = sc.tolerances
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            profile, path = build_profile(sc, task.energy)
            if rec["E_k"] is None:
                rec["E_k"] = sc.system.E_kin_in if sc.system else math.nan
            sol = solve(profile, tol=tol["ode_rtol"], wronskian_tol=tol["wronskian"],
                        eps_asym=tol["eps_asym"])
            params = extract_parameters(sol.c1, sol.c2, sol.d_inf, profile.omega_in,
                                        profile.omega_out, tol=tol["constants"])
            mats = {}
            for mode in sc.modes:
                if mode == "oracle":
                    grid, dt = _oracle_grid(sc)
                    mats[mode] = oracle_matrix(profile, sc.n_max, grid, dt)
                else:
                    mats[mode] = assemble_matrix(params, sc.n_max, mode, task.convention)
        rec["warnings"] = sorted({str(w.message) for w in caught})
        rec.update(theta=params.theta, nu=params.nu)
        if mats:
            first = mats[sc.modes[0]]
            rec["W_00"] = float(first.W[0, 0])
            ncol = max(0, sc.n_max - TRUNCATION_MARGIN) + 1
            rec["unitarity_defect"] = float(np.max(first.column_defects[:ncol]))
            diffs = [float(np.max(np.abs(a.W - b.W)))
                     for i, a in enumerate(mats.values()) for b in list(mats.values())[i + 1:]]
            rec["max_mode_discrepancy"] = max(diffs) if diffs else 0.0
        if out:
            if path is not None:
                write_path_csv(path, out / "path.csv")
            write_profile_csv(profile, sol, out / "profile.csv")
            pd = params.as_dict()
            pd.update(wronskian_drift=sol.wronskian_drift)
            rows = [(k, v) for k, v in pd.items()]
            rows += [("re_c1", sol.c1.real), ("im_c1", sol.c1.imag),
                     ("re_c2", sol.c2.real), ("im_c2", sol.c2.imag),
                     ("re_d_inf", sol.d_inf.real), ("im_d_inf", sol.d_inf.imag)]
            write_rows(out / "parameters.csv", ["name", "value"], rows)
            for mode, tm in mats.items():
                write_matrix_csv(tm, out / f"W_{mode}.csv",
                                 {"theta": params.theta, "nu": params.nu, "phi": params.phi})
            names = list(mats)
            diff_rows = []
            for i, a in enumerate(names):
                for b in names[i + 1:]:
                    d = np.abs(mats[a].W - mats[b].W)
                    ref = np.maximum(np.abs(mats[b].W), 1e-12)
                    diff_rows.append((a, b, float(d.max()), float(np.max(d / ref))))
            write_rows(out / "mode_differences.csv",
                       ["mode_a", "mode_b", "max_abs_diff", "max_rel_diff"], diff_rows)
    except ScatteringError as exc:
        rec["status"] = exc.code
        rec["message"] = str(exc)
    return rec


@lru_cache(maxsize=None)
def arbitrate_normalization(n_max: int = 6, rtol: float = ARBITRATION_RTOL) -> dict:
    """Compare the driven-formula normalisations with the grid oracle.

    Constant unit frequency (``theta = 0``) with a resonant Gaussian drive
    calibrated to each ``nu`` in :data:`ARBITRATION_NUS`; column ``n = 0``
    is compared entry-wise for ``m <= n_max``.
    """
    from .amplitudes import CONVENTIONS
    result = {"nu": list(ARBITRATION_NUS), "rtol": rtol, "n_max": n_max, "variants": {}}
    errs = {c: [] for c in CONVENTIONS}
    for nu in ARBITRATION_NUS:
        pr = analytic_profile({"shape": "constant", "omega": 1.0},
                              {"shape": "resonant", "amplitude": 1.0, "width": 2.0,
                               "center": 0.0, "omega": 1.0})
        pr = calibrate_drive(pr, nu)
        sol = solve(pr)
        params = extract_parameters(sol.c1, sol.c2, sol.d_inf, 1.0, 1.0)
        col = np.abs(overlap_matrix(pr, 0, n_rows=n_max)[:, 0]) ** 2
        for c in CONVENTIONS:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                W = assemble_matrix(params, n_max, "hermite", c).W[:, 0]
            errs[c].append(float(np.max(np.abs(W - col) / col)))
    for c, e in errs.items():
        result["variants"][c] = {"max_rel_error": e, "passed": bool(max(e) < rtol)}
    result["passed"] = [c for c, v in result["variants"].items() if v["passed"]]
    return result


def _versions():
    return {"itscatter": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run_tasks(tasks, jobs: int = 1):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(compute_point, tasks))
    return [compute_point(t) for t in tasks]


def execute(raw: dict, energies, out_dir, convention: str = "theta-hermite",
            jobs: int = 1, param: tuple | None = None, command: str = "sweep",
            seed: int | None = None) -> tuple[list[dict], dict]:
    """Run a set of points and write ``summary.csv`` and ``manifest.json``.

    ``energies`` may contain ``None`` (use the scenario's own energy).
    ``param = (key, values)`` sweeps a dotted scenario key instead; then
    each point uses the scenario energy.
    """
    sc = parse_scenario(json.dumps(raw))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = []
    if param is not None:
        key, values = param
        for i, v in enumerate(values):
            tasks.append(PointTask(i, None, set_parameter(raw, key, v),
                                   str(out / f"point_{i:03d}"), convention, (key, v)))
    else:
        for i, e in enumerate(energies):
            tasks.append(PointTask(i, e, raw, str(out / f"point_{i:03d}"), convention))
    records = run_tasks(tasks, jobs)
    sweep_warnings = []
    if not tasks:
        sweep_warnings.append("empty sweep: no points computed")
    seen = {}
    for r in records:
        key = r.get("param", r["E_k"])
        if key in seen:
            sweep_warnings.append(f"duplicate point {key!r} (rows {seen[key]} and {r['index']})")
        seen.setdefault(key, r["index"])
    if param is None:
        order = sorted(records, key=lambda r: (r["E_k"], r["index"]))
    else:
        order = records
    header = list(SUMMARY_HEADER)
    if param is not None:
        header = [param[0]] + header
    rows = []
    for r in order:
        row = [r[k] for k in SUMMARY_HEADER]
        if param is not None:
            row = [r["param"]] + row
        rows.append(row)
    write_rows(out / "summary.csv", header, rows)

    manifest = {
        "command": command,
        "scenario": raw,
        "modes": list(sc.modes),
        "n_max": sc.n_max,
        "tolerances": sc.tolerances,
        "oracle": sc.oracle,
        "normalization": {"convention": convention,
                          "eta_convention": ETA_CONVENTION},
        "points": [{"index": r["index"], "E_k": r["E_k"], "param": r.get("param"),
                    "status": r["status"], "message": r["message"],
                    "warnings": r["warnings"]} for r in records],
        "warnings": sweep_warnings,
        "seed": seed,
        "versions": _versions(),
    }
    if param is not None:
        manifest["parameter"] = {"key": param[0], "values": list(param[1])}
    if "hermite" in sc.modes:
        manifest["normalization"]["arbitration"] = arbitrate_normalization()
    else:
        manifest["normalization"]["arbitration"] = "not run (hermite mode not requested)"
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return records, manifest


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o).__name__)
