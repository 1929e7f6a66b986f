"""CSV/JSON artifact writers and the reproducibility manifest.

Column sets are stable and covered by a schema test.  CSV uses '.' decimals,
UTF-8, a header row and a deterministic column order; undefined cells (e.g.
r-columns at site 0) are written as 'nan'.
"""

from __future__ import annotations

import csv
import json
import subprocess
from pathlib import Path

import numpy as np

from . import __version__

PROFILE_COLUMNS = ["x", "u", "mean_r", "mean_p", "pp", "rr", "energy", "phi", "current"]
ESTIMATE_COLUMNS = PROFILE_COLUMNS + [
    "est_se_mean_r", "est_se_mean_p", "est_se_pp", "est_se_rr", "est_se_current"]
MACRO_COLUMNS = ["t", "u", "r", "e", "e_mech", "e_th"]


def _fmt(v) -> str:
    return repr(float(v))


def write_profile_csv(path, table) -> None:
    """ProfileTable rows x = 0..n; r-indexed columns are nan at x = 0."""
    n = table.n
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PROFILE_COLUMNS)
        for x in range(n + 1):
            row = [
                x, x / n,
                table.mean_r[x - 1] if x >= 1 else np.nan,
                table.mean_p[x],
                table.pp[x],
                table.rr[x - 1] if x >= 1 else np.nan,
                table.energy[x],
                table.phi[x - 1] if x >= 1 else np.nan,
                table.current[x] if x <= n - 1 else np.nan,
            ]
            w.writerow([row[0]] + [_fmt(v) for v in row[1:]])


def write_profile_summary(path, table, residual=None, iterations=None) -> None:
    payload = {
        "jbar": table.jbar,
        "pbar": table.pbar,
        "j_left": table.j_left,
        "j_right": table.j_right,
        "residual": residual,
        "iterations": iterations,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def write_estimates_csv(path, est, gamma: float) -> None:
    """EstimateTable rows mirroring the profile CSV plus est_se_* columns."""
    n = est.n
    phi = (-(0.5 / gamma) * (est.rr + est.pp_cross)
           - 0.25 * gamma * (est.pp[1:] + est.pp[:-1]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ESTIMATE_COLUMNS)
        for x in range(n + 1):
            energy = 0.5 * est.pp[x] + (0.5 * est.rr[x - 1] if x >= 1 else 0.0)
            row = [
                x, x / n,
                est.mean_r[x - 1] if x >= 1 else np.nan,
                est.mean_p[x],
                est.pp[x],
                est.rr[x - 1] if x >= 1 else np.nan,
                energy,
                phi[x - 1] if x >= 1 else np.nan,
                est.current[x] if x <= n - 1 else np.nan,
                est.se["mean_r"][x - 1] if x >= 1 else np.nan,
                est.se["mean_p"][x],
                est.se["pp"][x],
                est.se["rr"][x - 1] if x >= 1 else np.nan,
                est.se["current"][x] if x <= n - 1 else np.nan,
            ]
            w.writerow([row[0]] + [_fmt(v) for v in row[1:]])


def write_macro_csv(path, sol, t_list) -> None:
    """Time slices (t, u, r, e, e_mech, e_th) of a MacroSolution."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(MACRO_COLUMNS)
        for t in t_list:
            f = sol.fields_at(t)
            em, eth = f.e_mech, f.e_th
            for i, u in enumerate(f.u):
                w.writerow([_fmt(f.t), _fmt(u), _fmt(f.r[i]), _fmt(f.e[i]),
                            _fmt(em[i]), _fmt(eth[i])])


def _git_describe() -> str | None:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0:
            return out.stdout.strip()
    except Exception:
        pass
    return None


def write_manifest(outdir, effective_config: dict, seed: int | None = None,
                   extra: dict | None = None) -> Path:
    """Echo everything needed to reproduce the run into manifest.json."""
    payload = {
        "version": __version__,
        "git": _git_describe(),
        "seed": seed,
        "config": effective_config,
    }
    if extra:
        payload.update(extra)
    path = Path(outdir) / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, default=str) + "\n",
                    encoding="utf-8")
    return path
