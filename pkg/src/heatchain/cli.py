"""Command-line entry point.

Subcommands: moments (exact NESS profile), simulate (stochastic NESS run),
pde (macroscopic solve), verify (check suite), sweep (tau sweep of the
extrapolated current).  Configuration comes from key=value files and/or
flags; flags win.  Every run writes a manifest.json with the effective
configuration.

Exit codes: 0 success / all checks pass, 1 engine error, 2 configuration
error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SUBCOMMANDS = ("moments", "simulate", "pde", "verify", "sweep")

CONFIG_KEYS = {
    "n": int, "gamma": float, "gamma_tilde": float, "tau_plus": str,
    "T_minus": float, "T_plus": float, "dt": float, "seed": int,
    "replicas": int, "t_burnin": float, "t_measure": float, "out": str,
    "m_grid": int, "t_end": float, "suite": str, "tau_range": str,
    "method": str, "sweep_order": str,
}

DEFAULTS = {
    "n": 16, "gamma": 1.0, "gamma_tilde": 1.0, "tau_plus": "0.0",
    "T_minus": 1.0, "T_plus": 1.0, "seed": 0, "replicas": 4,
    "out": "out", "m_grid": 256, "t_end": 1.0, "suite": "full",
    "method": "auto", "sweep_order": "even-odd",
    "dt": None, "t_burnin": None, "t_measure": None, "tau_range": None,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    values: dict = field(default_factory=dict)

    def chain_params(self):
        from .chain import ChainParams
        v = self.values
        return ChainParams(n=v["n"], gamma=v["gamma"],
                           gamma_tilde=v["gamma_tilde"], tau_plus=v["tau_plus"],
                           T_minus=v["T_minus"], T_plus=v["T_plus"])

    def sim_config(self):
        from .sim import SimConfig
        v = self.values
        return SimConfig(dt=v["dt"], t_burnin=v["t_burnin"],
                         t_measure=v["t_measure"], n_replicas=v["replicas"],
                         seed=v["seed"], sweep_order=v["sweep_order"])


def _read_config_file(path: str) -> dict:
    out = {}
    unknown = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in CONFIG_KEYS:
            unknown.append(key)
            continue
        try:
            out[key] = CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}")
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return out


def parse_config(argv) -> RunConfig:
    """Merge defaults, config file and flags (flags strongest)."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    values = dict(DEFAULTS)
    if args.config:
        values.update(_read_config_file(args.config))
    flag_map = {
        "n": args.n, "gamma": args.gamma, "gamma_tilde": args.gamma_tilde,
        # for sweep, --tau is the range spec, not a tension value
        "tau_plus": args.tau if args.cmd != "sweep" else None,
        "T_minus": args.t_minus, "T_plus": args.t_plus,
        "dt": args.dt, "seed": args.seed, "replicas": args.replicas,
        "out": args.out,
        "t_burnin": getattr(args, "t_burnin", None),
        "t_measure": getattr(args, "t_measure", None),
        "m_grid": getattr(args, "m_grid", None),
        "t_end": getattr(args, "t_end", None),
        "suite": getattr(args, "suite", None),
        "tau_range": getattr(args, "tau", None) if args.cmd == "sweep" else None,
        "method": getattr(args, "method", None),
        "sweep_order": getattr(args, "sweep_order", None),
    }
    for key, val in flag_map.items():
        if val is not None:
            values[key] = val
    cfg = RunConfig(subcommand=args.cmd, values=values)
    cfg.chain_params()          # validates parameter ranges early
    return cfg


def _add_common(sp):
    sp.add_argument("--config", help="key=value configuration file")
    sp.add_argument("--n", type=int)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--gamma-tilde", dest="gamma_tilde", type=float)
    sp.add_argument("--tau", help="tension: number, ramp:a:b:T or sinusoid:b:a:P")
    sp.add_argument("--t-minus", dest="t_minus", type=float)
    sp.add_argument("--t-plus", dest="t_plus", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--replicas", type=int)
    sp.add_argument("--out")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatchain",
        description="Open harmonic chain with momentum-exchange noise: exact "
                    "moments, stochastic simulation, macroscopic PDEs, checks")
    sub = parser.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("moments", help="exact NESS profile (CSV + JSON summary)")
    _add_common(p)
    p.add_argument("--method", choices=("auto", "kron", "iterative"))
    p = sub.add_parser("simulate", help="stochastic NESS run with error bars")
    _add_common(p)
    p.add_argument("--t-burnin", dest="t_burnin", type=float)
    p.add_argument("--t-measure", dest="t_measure", type=float)
    p.add_argument("--sweep-order", dest="sweep_order",
                   choices=("even-odd", "left-to-right", "random-permutation"))
    p = sub.add_parser("pde", help="macroscopic stretch/energy solve")
    _add_common(p)
    p.add_argument("--m-grid", dest="m_grid", type=int)
    p.add_argument("--t-end", dest="t_end", type=float)
    p = sub.add_parser("verify", help="run the verification suite")
    _add_common(p)
    p.add_argument("--suite", choices=("quick", "full"))
    p = sub.add_parser("sweep", help="tau sweep of the extrapolated current")
    _add_common(p)
    return parser


def _echo_config(cfg: RunConfig, outdir: Path):
    from .io import write_manifest
    outdir.mkdir(parents=True, exist_ok=True)
    effective = {"subcommand": cfg.subcommand, **cfg.values}
    write_manifest(outdir, effective, seed=cfg.values.get("seed"))


def _run_moments(cfg: RunConfig, outdir: Path) -> int:
    from .io import write_profile_csv, write_profile_summary
    from .moments import profile_from_moments, stationary_solution
    params = cfg.chain_params()
    sol = stationary_solution(params, method=cfg.values["method"])
    prof = profile_from_moments(sol)
    write_profile_csv(outdir / "profile.csv", prof)
    write_profile_summary(outdir / "summary.json", prof,
                          residual=sol.residual, iterations=sol.iterations)
    print(f"moments: n={params.n} jbar={prof.jbar:.6e} pbar={prof.pbar:.6e} "
          f"residual={sol.residual:.2e}")
    return 0


def _run_simulate(cfg: RunConfig, outdir: Path) -> int:
    from .io import write_estimates_csv
    from .sim import run_ness
    params = cfg.chain_params()
    est = run_ness(params, cfg.sim_config())
    write_estimates_csv(outdir / "estimates.csv", est, gamma=params.gamma)
    flags = f" flags={est.flags}" if est.flags else ""
    print(f"simulate: n={params.n} batches={est.batch_count} "
          f"jbar={est.j_left:.4e}+-{3 * est.se['j_left']:.1e}{flags}")
    return 0


def _run_pde(cfg: RunConfig, outdir: Path) -> int:
    from .io import write_macro_csv
    from .pde import solve_macro, stationary_profiles
    params = cfg.chain_params()
    m = cfg.values["m_grid"]
    t_end = cfg.values["t_end"]
    dt = cfg.values["dt"] or 0.5 / (m * m)
    r0 = np.zeros(m + 1)
    r0[-1] = params.tau(0.0)
    e0 = np.full(m + 1, 0.5 * (params.T_minus + params.T_plus))
    e0[0] = params.T_minus
    e0[-1] = params.T_plus + 0.5 * params.tau(0.0) ** 2
    sol = solve_macro(params, r0, e0, t_end=t_end, dt=dt, m=m)
    slices = [float(t) for t in np.linspace(0.0, t_end, 6)]
    slices = [float(sol.times[np.argmin(np.abs(sol.times - t))]) for t in slices]
    write_macro_csv(outdir / "macro.csv", sol, slices)
    summary = {"t_end": t_end, "m": m, "dt": dt,
               "mesh_ratio": sol.mesh_ratio, "mesh_flagged": sol.mesh_flagged}
    if params.tau_is_constant:
        ss = stationary_profiles(params)
        summary.update({"J_ss": ss.J_ss, "u_max": ss.u_max,
                        "e_th_max": ss.e_th_max})
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"pde: m={m} t_end={t_end} mesh_ratio={sol.mesh_ratio:.3g}")
    return 0


def _run_verify(cfg: RunConfig, outdir: Path) -> int:
    from .verify import run_suite
    params = cfg.chain_params()
    reports, code = run_suite(params, suite=cfg.values["suite"])
    for rep in reports:
        (outdir / f"report_{rep.name}.json").write_text(rep.to_json() + "\n")
        print(f"verify[{rep.verdict:>13}] {rep.name}")
    print(f"verify: {len(reports)} checks, exit {code}")
    return code


def _parse_range(spec: str) -> np.ndarray:
    try:
        lo, step, hi = (float(v) for v in spec.split(":"))
    except Exception:
        raise ConfigError(f"range must be lo:step:hi, got {spec!r}")
    if step <= 0 or hi < lo:
        raise ConfigError(f"bad range {spec!r}")
    return np.arange(lo, hi + 1e-12, step)


def _run_sweep(cfg: RunConfig, outdir: Path) -> int:
    import csv as _csv
    from .verify import check_uphill
    params = cfg.chain_params()
    spec = cfg.values.get("tau_range")
    if not spec:
        raise ConfigError("sweep needs --tau lo:step:hi")
    taus = _parse_range(spec)
    report = check_uphill(params, taus)
    with open(outdir / "sweep.csv", "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["tau", "n_jbar", "J_ss", "sign_match",
                    "n_cold_bath_heat_absorbed"])
        for row in report.metrics["rows"]:
            w.writerow([row["tau"], row["n_jbar"], row["J_ss"],
                        int(row["sign_match"]),
                        row["n_cold_bath_heat_absorbed"]])
    (outdir / "report_uphill.json").write_text(report.to_json() + "\n")
    print(f"sweep: crossing={report.metrics['crossing']} "
          f"tau*={report.metrics['tau_star']:.4f} verdict={report.verdict}")
    return 0 if report.verdict != "fail" else 3


def main(argv=None) -> int:
    if "NESS_THREADS" in os.environ:      # caps BLAS worker threads
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, os.environ["NESS_THREADS"])
    try:
        cfg = parse_config(argv if argv is not None else sys.argv[1:])
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    outdir = Path(cfg.values["out"])
    try:
        _echo_config(cfg, outdir)
        runner = {"moments": _run_moments, "simulate": _run_simulate,
                  "pde": _run_pde, "verify": _run_verify,
                  "sweep": _run_sweep}[cfg.subcommand]
        return runner(cfg, outdir)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
