"""Convergence studies checking the model's limit statements at desk scale.

Each check runs the exact engines over an n-sequence, extrapolates in 1/n
(Richardson with the two largest sizes; the closed-form finite-n expressions
all have 1/n leading corrections) and produces a machine-readable report.
Informational checks (conjecture probes, out-of-proof-scope cases) never fail
a suite.  Tolerances are artifact choices and are stated in every report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace, asdict

import numpy as np

from .chain import ChainParams
from .moments import (MomentSolution, equipartition_defect, evolve_moments,
                      profile_from_moments, stationary_solution)
from .pde import solve_macro, stationary_profiles

__all__ = [
    "VerificationReport",
    "richardson",
    "check_elongation_profile",
    "check_current_limit",
    "check_energy_profile",
    "check_uphill",
    "check_interior_maximum",
    "check_nonstationary_consistency",
    "run_suite",
]


@dataclass
class VerificationReport:
    """Outcome of one check.

    verdict is "pass", "fail" or "informational"; informational reports are
    excluded from suite exit codes.
    """

    name: str
    params: dict
    n_list: list
    metrics: dict
    extrapolated: float | None
    target: float | None
    tolerance: str
    verdict: str
    engines: list
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict != "fail"

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v
        return json.dumps(clean(asdict(self)), indent=2)


def _params_dict(params: ChainParams) -> dict:
    return {"gamma": params.gamma, "gamma_tilde": params.gamma_tilde,
            "tau": params.tau(0.0) if params.tau_is_constant else "schedule",
            "T_minus": params.T_minus, "T_plus": params.T_plus}


def richardson(ns, vals, order: int = 1) -> float:
    """Eliminate the leading n^-order correction using the two largest sizes."""
    ns = np.asarray(ns, dtype=float)
    vals = np.asarray(vals, dtype=float)
    idx = np.argsort(ns)
    n1, n2 = ns[idx[-2]], ns[idx[-1]]
    v1, v2 = vals[idx[-2]], vals[idx[-1]]
    w = n2 ** order / (n2 ** order - n1 ** order)
    return float(w * v2 + (1.0 - w) * v1)


def _solve_each(params: ChainParams, n_list) -> dict[int, MomentSolution]:
    return {n: stationary_solution(replace(params, n=n)) for n in n_list}


def check_elongation_profile(params: ChainParams, n_list) -> VerificationReport:
    """sup_x |<r_x> - tau x/n| must shrink with n and end below 2 tau/n + 1e-9."""
    tau = params.tau(0.0)
    sups = []
    for n in n_list:
        sol_m = stationary_solution(replace(params, n=n)).m
        x = np.arange(1, n + 1)
        sups.append(float(np.abs(sol_m[:n] - tau * x / n).max()))
    n_max = max(n_list)
    decreasing = all(s2 <= s1 + 1e-12 for s1, s2 in zip(sups, sups[1:]))
    bound = 2.0 * abs(tau) / n_max + 1e-9
    ok = decreasing and sups[-1] <= bound
    return VerificationReport(
        name="elongation_profile", params=_params_dict(params),
        n_list=list(n_list), metrics={"sup_error": sups},
        extrapolated=sups[-1], target=0.0,
        tolerance=f"decreasing; final <= 2 tau / n_max + 1e-9 = {bound:.3g}",
        verdict="pass" if ok else "fail", engines=["exact-moments"])


def check_current_limit(params: ChainParams, n_list) -> VerificationReport:
    """Richardson-extrapolated n jbar within 1% of the closed-form limit."""
    ss = stationary_profiles(params)
    njs = []
    for n in n_list:
        prof = profile_from_moments(stationary_solution(replace(params, n=n)))
        njs.append(n * prof.jbar)
    ex = richardson(n_list, njs)
    scale = max(1.0, abs(ss.J_ss))
    ok = abs(ex - ss.J_ss) <= 0.01 * scale
    return VerificationReport(
        name="current_limit", params=_params_dict(params), n_list=list(n_list),
        metrics={"n_jbar": njs}, extrapolated=ex, target=ss.J_ss,
        tolerance="|extrapolated - target| <= 1% of max(1, |target|)",
        verdict="pass" if ok else "fail", engines=["exact-moments"])


DEFAULT_G_SET = (
    ("one", lambda u: 1.0),
    ("linear", lambda u: u),
    ("sin_pi", lambda u: np.sin(np.pi * u)),
)


def check_energy_profile(params: ChainParams, n_list,
                         G_set=DEFAULT_G_SET) -> VerificationReport:
    """(1/n) sum G(x/n) <E_x> against the quadrature of the macroscopic limit.

    Proven only at gamma = 1; for gamma != 1 the verdict is downgraded to
    informational.
    """
    from scipy.integrate import quad
    ss = stationary_profiles(params)
    informational = params.gamma != 1.0
    metrics = {}
    worst_rel = 0.0
    all_ok = True
    for label, G in G_set:
        target, _ = quad(lambda u: G(u) * ss.e_ss(u), 0.0, 1.0, limit=200)
        vals = []
        for n in n_list:
            sol = stationary_solution(replace(params, n=n))
            prof = profile_from_moments(sol)
            u = np.arange(1, n + 1) / n
            Gx = np.asarray([float(G(v)) for v in u])
            vals.append(float(np.dot(Gx, prof.energy[1:]) / n))
        errs = [abs(v - target) for v in vals]
        decreasing = all(e2 <= e1 + 1e-12 for e1, e2 in zip(errs, errs[1:]))
        ex = richardson(n_list, vals)
        rel = abs(ex - target) / max(1.0, abs(target))
        worst_rel = max(worst_rel, rel)
        all_ok = all_ok and decreasing and rel <= 0.01
        metrics[label] = {"values": vals, "target": target,
                          "extrapolated": ex, "rel_error": rel}
    verdict = "informational" if informational else ("pass" if all_ok else "fail")
    return VerificationReport(
        name="energy_profile", params=_params_dict(params), n_list=list(n_list),
        metrics=metrics, extrapolated=None, target=None,
        tolerance="per G: decreasing error, extrapolated rel error <= 1%",
        verdict=verdict, engines=["exact-moments", "quadrature"],
        notes=(["gamma != 1: outside the proven case, informational only"]
               if informational else []))


def check_uphill(params: ChainParams, tau_grid, n_pair=(64, 128)) -> VerificationReport:
    """Sign of extrapolated n jbar vs the closed-form current over a tau sweep.

    Flags the reversal point and compares it with
    tau* = sqrt((1+gamma^2)(T_minus - T_plus)); passes when every sign matches
    (points with |J_ss| below 1e-9 are skipped) and the empirical crossing
    sits within one grid step of tau*.  Also records the heat flowing into
    the colder bath (never out of it, per the model's no-refrigerator
    behaviour) as an informational metric.
    """
    if params.T_minus <= params.T_plus:
        raise ValueError("uphill scan expects T_minus > T_plus")
    g = params.gamma
    tau_grid = [float(t) for t in tau_grid]
    rows = []
    signs_ok = True
    for tau in tau_grid:
        p_tau = replace(params, tau_plus=tau)
        ss = stationary_profiles(p_tau)
        njs, cold_heat = [], []
        for n in n_pair:
            prof = profile_from_moments(stationary_solution(replace(p_tau, n=n)))
            njs.append(n * prof.jbar)
            # heat absorbed by the system from the colder (right) bath:
            # h+ = (gt/2)(T+ - <p_n^2>); negative throughout = no refrigerator
            h_plus = -(prof.j_right + tau * prof.mean_p[-1])
            cold_heat.append(n * h_plus)
        ex = richardson(n_pair, njs)
        match = (np.sign(ex) == np.sign(ss.J_ss)) or abs(ss.J_ss) < 1e-9
        signs_ok = signs_ok and bool(match)
        rows.append({"tau": tau, "n_jbar": ex, "J_ss": ss.J_ss,
                     "sign_match": bool(match),
                     "n_cold_bath_heat_absorbed": cold_heat[-1]})
    tau_star = float(np.sqrt((1.0 + g * g) * (params.T_minus - params.T_plus)))
    crossing = None
    for a, b in zip(rows, rows[1:]):
        if a["n_jbar"] > 0 >= b["n_jbar"]:
            crossing = 0.5 * (a["tau"] + b["tau"])
            break
    step = tau_grid[1] - tau_grid[0] if len(tau_grid) > 1 else float("inf")
    cross_ok = crossing is not None and abs(crossing - tau_star) <= step
    ok = signs_ok and cross_ok
    return VerificationReport(
        name="uphill_diffusion", params=_params_dict(params),
        n_list=list(n_pair),
        metrics={"rows": rows, "crossing": crossing, "tau_star": tau_star},
        extrapolated=crossing, target=tau_star,
        tolerance="all signs match; |crossing - tau*| <= one sweep step",
        verdict="pass" if ok else "fail", engines=["exact-moments"])


def check_interior_maximum(params: ChainParams, n: int) -> VerificationReport:
    """Location and height of the temperature maximum from the exact solver.

    Compares argmax_x <p_x^2> against the argmax of the stationary thermal
    parabola (u_peak); requires |argmax/n - u_peak| <= 2/n and peak >=
    max(T_minus, T_plus) when the interior condition
    2 (1+gamma^2) |dT| <= tau^2 holds.  Otherwise reports the boundary
    maximum (informational).
    """
    ss = stationary_profiles(params)
    prof = profile_from_moments(stationary_solution(replace(params, n=n)))
    xstar = int(np.argmax(prof.pp))
    peak = float(prof.pp[xstar])
    metrics = {"argmax_x": xstar, "argmax_u": xstar / n, "peak": peak,
               "u_peak": ss.u_peak, "u_max_reported": ss.u_max,
               "e_th_max": ss.e_th_max}
    if not ss.interior:
        at_edge = xstar <= 2 or xstar >= n - 2
        return VerificationReport(
            name="interior_maximum", params=_params_dict(params), n_list=[n],
            metrics=metrics, extrapolated=xstar / n, target=ss.u_peak,
            tolerance="interior condition fails: endpoint maximum expected",
            verdict="informational", engines=["exact-moments"],
            notes=[f"maximum at the boundary (edge={at_edge})"])
    ok = abs(xstar / n - ss.u_peak) <= 2.0 / n and peak >= max(
        params.T_minus, params.T_plus)
    return VerificationReport(
        name="interior_maximum", params=_params_dict(params), n_list=[n],
        metrics=metrics, extrapolated=xstar / n, target=ss.u_peak,
        tolerance="|argmax/n - u_peak| <= 2/n and peak >= max(T-, T+)",
        verdict="pass" if ok else "fail", engines=["exact-moments"])


def check_nonstationary_consistency(params: ChainParams, n_list, m: int,
                                    t_list) -> VerificationReport:
    """Moment-ODE profiles vs macroscopic fields under a tension ramp.

    Both engines start from the same equilibrium data (Gibbs moments at
    temperature T_minus; flat macro fields).  The discrepancy is the sup over
    sites 1..n-1 of |<E_x> - e(t, x/n)| and |<r_x> - r(t, x/n)| relative to
    the macro field scale; requires decrease in n and a final value < 5%.
    Proven only at gamma = 1; other gammas are informational.
    """
    if params.T_minus != params.T_plus:
        raise ValueError("matched initial data here assumes T_minus == T_plus")
    T0 = params.T_minus
    t_list = sorted(float(t) for t in t_list)
    t_end = t_list[-1]
    dt_pde = 0.5 / (m * m)
    macro = solve_macro(params, r0=np.zeros(m + 1), e0=np.full(m + 1, T0),
                        t_end=t_end, dt=dt_pde, m=m)
    # store the nearest mesh times for lookups
    informational = params.gamma != 1.0
    discrepancy = {}
    for n in n_list:
        p_n = replace(params, n=n)
        dim = 2 * n + 1
        m0 = np.zeros(dim)
        M0 = T0 * np.eye(dim)
        traj = evolve_moments(p_n, m0, M0, t_end=t_end, t_out=t_list)
        worst = []
        for k, t in enumerate(traj.times):
            fk = macro.index_of(_nearest(macro.times, t))
            r_mac = np.interp(np.arange(1, n) / n, macro.u, macro.R[fk])
            e_mac = np.interp(np.arange(1, n) / n, macro.u, macro.E[fk])
            mm, MM = traj.means[k], traj.seconds[k]
            diag = np.diagonal(MM)
            # sites x = 1..n-1: r_x at index x-1, p_x at index n+x
            mean_r = mm[0:n - 1]
            energy = 0.5 * (diag[n + 1:2 * n] + diag[0:n - 1])
            scale_e = max(1.0, float(np.abs(e_mac).max()))
            scale_r = max(1.0, float(np.abs(r_mac).max()))
            d = max(float(np.abs(energy - e_mac).max()) / scale_e,
                    float(np.abs(mean_r - r_mac).max()) / scale_r)
            worst.append(d)
        discrepancy[n] = worst
    finals = [max(discrepancy[n]) for n in n_list]
    decreasing = all(b <= a + 1e-12 for a, b in zip(finals, finals[1:]))
    ok = decreasing and finals[-1] < 0.05
    verdict = ("informational" if informational
               else ("pass" if ok else "fail"))
    return VerificationReport(
        name="nonstationary_consistency", params=_params_dict(params),
        n_list=list(n_list),
        metrics={"discrepancy": {str(k): v for k, v in discrepancy.items()},
                 "t_list": t_list},
        extrapolated=finals[-1], target=0.0,
        tolerance="relative sup discrepancy decreasing in n, final < 5%",
        verdict=verdict, engines=["exact-moments", "macro-pde"],
        notes=(["gamma != 1: informational"] if informational else []))


def _nearest(times: np.ndarray, t: float) -> float:
    return float(times[np.argmin(np.abs(times - t))])


def run_suite(params: ChainParams, suite: str = "full") -> tuple[list, int]:
    """Run the verification checks and aggregate an exit code.

    Returns (reports, exit_code): 0 when every non-informational check
    passes, 3 otherwise.
    """
    g = params.gamma
    quick = suite == "quick"
    n_small = [16, 32, 64] if quick else [32, 64, 128]
    n_large = n_small if quick else [32, 64, 128, 256]
    reports = [
        check_elongation_profile(params, n_small),
        check_current_limit(params, n_large),
        check_energy_profile(params, n_small),
    ]
    if params.T_minus > params.T_plus:
        taus = np.arange(0.0, 3.0 + 1e-9, 0.25)
        reports.append(check_uphill(params, taus,
                                    n_pair=(32, 64) if quick else (64, 128)))
    if g == 1.0:
        bulge = replace(params, T_plus=params.T_minus,
                        tau_plus=max(2.0, params.tau(0.0)))
        reports.append(check_interior_maximum(bulge, 64 if quick else 128))
        ramp = ChainParams(n=params.n, gamma=g, gamma_tilde=params.gamma_tilde,
                           tau_plus="ramp:0:1:0.25", T_minus=params.T_minus,
                           T_plus=params.T_minus)
        reports.append(check_nonstationary_consistency(
            ramp, [16, 32] if quick else [16, 64], m=128 if quick else 256,
            t_list=[0.1, 0.5]))
    failed = [r for r in reports if r.verdict == "fail"]
    return reports, (3 if failed else 0)
