"""Exact first/second moments of the chain: stationary solves and evolution.

Stationary means solve  B m + c = 0.  Raw second moments M = <z z^T> solve the
generalized Lyapunov equation

    B M + M B^T + sum_k C_k M C_k^T + c m^T + m c^T + diag(D) = 0.

Two solvers are provided: a direct sparse solve of the vectorized system on
symmetric-packed unknowns ("kron", the default) and a lagged fixed-point
iteration whose inner standard Lyapunov equation reuses one Schur
factorization ("iterative").  The fixed-point contraction degrades like
1 - O(1/n^2), so it is only practical for small n; "auto" therefore goes
straight to the direct solve.

Raw moments are the primitive; covariances are derived on demand.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .chain import ChainParams, ip, ir
from .operators import OperatorSet, assemble_operators, exchange_channels, exchange_term

__all__ = [
    "MomentSolverError",
    "MomentSolution",
    "MomentTrajectory",
    "ProfileTable",
    "DecompositionReport",
    "solve_stationary_mean",
    "solve_stationary_second_moments",
    "stationary_solution",
    "lyapunov_residual",
    "evolve_moments",
    "profile_from_moments",
    "energy_decomposition",
    "equipartition_defect",
]

MAX_ITERATIONS = 200
RESIDUAL_TOL = 1e-10
PSD_TOL = 1e-8


class MomentSolverError(RuntimeError):
    """Raised on non-convergence, singular systems or PSD violations."""


@dataclass
class MomentSolution:
    """Stationary (or time-t) means and raw second moments.

    Attributes:
        m: mean vector <z>, length 2n+1.
        M: symmetric raw second-moment matrix <z z^T>.
        residual: max-norm residual of the defining linear equations.
        iterations: inner iterations used (0 for direct solves).
        method: solver that produced the result.
        ops: the OperatorSet the solution belongs to.
    """

    m: np.ndarray
    M: np.ndarray
    residual: float
    iterations: int
    method: str
    ops: OperatorSet

    @property
    def covariance(self) -> np.ndarray:
        return self.M - np.outer(self.m, self.m)

    def check_psd(self, tol: float = PSD_TOL) -> float:
        """Smallest covariance eigenvalue; raises if below -tol * trace."""
        cov = 0.5 * (self.covariance + self.covariance.T)
        lam = float(np.linalg.eigvalsh(cov)[0])
        if lam < -tol * max(np.trace(cov), 1e-30):
            raise MomentSolverError(
                f"covariance not PSD: min eigenvalue {lam:.3e} "
                f"(trace {np.trace(cov):.3e})")
        return lam


def solve_stationary_mean(ops: OperatorSet) -> np.ndarray:
    """Stationary mean: solves B m + c = 0 by sparse LU."""
    try:
        m = spla.spsolve(ops.B.tocsc(), -ops.c)
    except Exception as exc:  # pragma: no cover - B is nonsingular for valid params
        raise MomentSolverError(f"singular drift matrix: {exc}") from exc
    res = float(np.abs(ops.B.dot(m) + ops.c).max())
    if not np.isfinite(res) or res > 1e-8 * (1.0 + float(np.abs(m).max())):
        raise MomentSolverError(f"mean solve residual too large: {res:.3e}")
    return m


def lyapunov_residual(ops: OperatorSet, m: np.ndarray, M: np.ndarray) -> float:
    """Max-norm residual of the generalized Lyapunov equation."""
    F = np.outer(ops.c, m) + np.outer(m, ops.c) + np.diag(ops.D)
    R = ops.B.dot(M) + ops.B.dot(M.T).T + exchange_term(M, ops.n, ops.gamma) + F
    return float(np.abs(R).max())


def _forcing(ops: OperatorSet, m: np.ndarray) -> np.ndarray:
    return np.outer(ops.c, m) + np.outer(m, ops.c) + np.diag(ops.D)


def _solve_kron(ops: OperatorSet, m: np.ndarray) -> np.ndarray:
    """Direct sparse solve of the vectorized system on packed unknowns.

    Row-major flatten: vec(B M + M B^T + sum C_k M C_k^T)
    = [kron(B, I) + kron(I, B) + sum kron(C_k, C_k)] vec(M).
    """
    dim = ops.dim
    I = sp.identity(dim, format="csr")
    K = sp.kron(ops.B, I) + sp.kron(I, ops.B)
    for C in exchange_channels(ops):
        K = K + sp.kron(C, C)
    iu, ju = np.triu_indices(dim)
    nsym = iu.size
    sidx = np.empty((dim, dim), dtype=np.int64)
    sidx[iu, ju] = np.arange(nsym)
    sidx[ju, iu] = sidx[iu, ju]
    rows = np.arange(dim * dim)
    P = sp.csr_matrix((np.ones(dim * dim), (rows, sidx[rows // dim, rows % dim])),
                      shape=(dim * dim, nsym))
    Ksym = (K.tocsr() @ P)[iu * dim + ju]
    rhs = -_forcing(ops, m)[iu, ju]
    x = spla.spsolve(Ksym.tocsc(), rhs)
    if not np.all(np.isfinite(x)):
        raise MomentSolverError("direct Lyapunov solve returned non-finite values")
    M = np.empty((dim, dim))
    M[iu, ju] = x
    M[ju, iu] = x
    return M


class _SchurLyap:
    """B X + X B^T + Q = 0 solver reusing one real Schur factorization of B."""

    def __init__(self, B_dense: np.ndarray):
        self.T, self.Z = sla.schur(B_dense, output="real")
        self._trsyl = sla.get_lapack_funcs("trsyl", (B_dense,))

    def solve(self, Q: np.ndarray) -> np.ndarray:
        qt = self.Z.T @ Q @ self.Z
        y, scale, info = self._trsyl(self.T, self.T, qt, tranb="C")
        if info < 0:
            raise MomentSolverError(f"trsyl failed with info={info}")
        return self.Z @ (y * (-1.0 / scale)) @ self.Z.T


def _solve_iterative(ops: OperatorSet, m: np.ndarray, tol: float,
                     max_iter: int) -> tuple[np.ndarray, int, float]:
    """Lagged fixed point: M <- lyap(B, exchange_term(M) + forcing)."""
    F = _forcing(ops, m)
    lyap = _SchurLyap(ops.B.toarray())
    M = np.zeros_like(F)
    res = np.inf
    for it in range(1, max_iter + 1):
        M = lyap.solve(exchange_term(M, ops.n, ops.gamma) + F)
        M = 0.5 * (M + M.T)
        res = lyapunov_residual(ops, m, M)
        if res <= tol:
            return M, it, res
    raise MomentSolverError(
        f"fixed-point Lyapunov iteration did not reach {tol:.1e} in "
        f"{max_iter} iterations (residual {res:.3e}); use method='kron'")


def solve_stationary_second_moments(ops: OperatorSet,
                                    m: np.ndarray | None = None,
                                    method: str = "auto",
                                    tol: float = RESIDUAL_TOL,
                                    max_iter: int = MAX_ITERATIONS) -> MomentSolution:
    """Solve the generalized Lyapunov equation for the raw second moments.

    Args:
        ops: operators assembled with a constant tension.
        m: stationary mean; computed if omitted.
        method: "kron" (direct sparse, default under "auto"), or "iterative"
            (lagged fixed point; practical only for small n).
        tol: absolute max-norm residual accepted.
        max_iter: iteration cap for the fixed point.

    Raises:
        MomentSolverError: non-convergence, singular system, or covariance
            not PSD beyond tolerance.
    """
    if m is None:
        m = solve_stationary_mean(ops)
    if method == "auto":
        method = "kron"
    if method == "kron":
        M = _solve_kron(ops, m)
        M = 0.5 * (M + M.T)
        iterations = 0
    elif method == "iterative":
        M, iterations, _ = _solve_iterative(ops, m, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = lyapunov_residual(ops, m, M)
    if res > max(tol, 1e-12 * (1.0 + float(np.abs(M).max()))):
        raise MomentSolverError(f"Lyapunov residual {res:.3e} above tolerance {tol:.1e}")
    sol = MomentSolution(m=m, M=M, residual=res, iterations=iterations,
                         method=method, ops=ops)
    sol.check_psd()
    return sol


def stationary_solution(params: ChainParams, method: str = "auto",
                        tau_value: float | None = None) -> MomentSolution:
    """Convenience: assemble operators and solve means + second moments."""
    ops = assemble_operators(params, tau_value)
    return solve_stationary_second_moments(ops, method=method)


# ---------------------------------------------------------------------------
# time evolution of moments (macroscopic time, n^2 reinstated)
# ---------------------------------------------------------------------------

@dataclass
class MomentTrajectory:
    times: np.ndarray
    means: list
    seconds: list
    dt: float

    def solution_at(self, k: int, ops: OperatorSet) -> MomentSolution:
        return MomentSolution(m=self.means[k], M=self.seconds[k], residual=np.nan,
                              iterations=0, method="evolve", ops=ops)


def evolve_moments(params: ChainParams, m0: np.ndarray, M0: np.ndarray,
                   t_end: float, dt: float | None = None,
                   t_out=None) -> MomentTrajectory:
    """Integrate the moment ODEs to macroscopic time t_end with RK4.

        dm/dt = n^2 (B m + c(t))
        dM/dt = n^2 (B M + M B^T + sum C_k M C_k^T + c(t) m^T + m c(t)^T + D)

    dt defaults to 0.5 / (n^2 ||B||_1) and is halved (up to 20 times) if the
    moment norms blow up; symmetry of M is enforced every step.

    Args:
        params: chain parameters; tau_plus may be a schedule of macroscopic t.
        m0, M0: initial mean and raw second moments.
        t_end: final macroscopic time.
        t_out: times at which to store the state (defaults to [0, t_end]).
    """
    ops = assemble_operators(params, params.tau(0.0))
    n, n2 = params.n, params.n ** 2
    B = ops.B
    Ddiag = np.diag(ops.D)
    norm_B1 = float(np.abs(B).sum(axis=0).max())
    if dt is None:
        dt = 0.5 / (n2 * norm_B1)
    if t_out is None:
        t_out = [0.0, t_end]
    t_out = sorted(float(t) for t in t_out)
    if t_out and (t_out[0] < 0.0 or t_out[-1] > t_end + 1e-12):
        raise ValueError("t_out must lie in [0, t_end]")

    def rhs(t, m, M):
        tau = params.tau(t)
        c = np.zeros_like(m)
        c[ip(n, n)] = tau
        dm = n2 * (B.dot(m) + c)
        BM = B.dot(M)
        dM = n2 * (BM + BM.T + exchange_term(M, n, params.gamma)
                   + np.outer(c, m) + np.outer(m, c) + Ddiag)
        return dm, dM

    m = np.array(m0, dtype=float)
    M = 0.5 * (np.asarray(M0, dtype=float) + np.asarray(M0, dtype=float).T)
    scale0 = max(1.0, float(np.abs(M).max()))
    times, means, seconds = [], [], []
    out_iter = iter(t_out)
    next_out = next(out_iter, None)
    t = 0.0
    halvings = 0
    while True:
        while next_out is not None and t >= next_out - 1e-12:
            times.append(t)
            means.append(m.copy())
            seconds.append(M.copy())
            next_out = next(out_iter, None)
        if next_out is None and t >= t_end - 1e-12:
            break
        h = min(dt, (next_out if next_out is not None else t_end) - t)
        k1m, k1M = rhs(t, m, M)
        k2m, k2M = rhs(t + 0.5 * h, m + 0.5 * h * k1m, M + 0.5 * h * k1M)
        k3m, k3M = rhs(t + 0.5 * h, m + 0.5 * h * k2m, M + 0.5 * h * k2M)
        k4m, k4M = rhs(t + h, m + h * k3m, M + h * k3M)
        m_new = m + (h / 6.0) * (k1m + 2 * k2m + 2 * k3m + k4m)
        M_new = M + (h / 6.0) * (k1M + 2 * k2M + 2 * k3M + k4M)
        M_new = 0.5 * (M_new + M_new.T)
        bad = (not np.all(np.isfinite(M_new))
               or float(np.abs(M_new).max()) > 1e6 * scale0)
        if bad:
            halvings += 1
            if halvings > 20:
                raise MomentSolverError(
                    f"moment evolution unstable at t={t:.4g} even after "
                    f"{halvings} step halvings")
            dt *= 0.5
            continue
        m, M = m_new, M_new
        t += h
    return MomentTrajectory(times=np.array(times), means=means,
                            seconds=seconds, dt=dt)


# ---------------------------------------------------------------------------
# derived observables
# ---------------------------------------------------------------------------

@dataclass
class ProfileTable:
    """Per-site stationary observables derived from a MomentSolution.

    Site conventions: mean_r, rr, phi, mech_* live on x = 1..n; mean_p, pp,
    energy on x = 0..n; current on bonds x = 0..n-1.  Both mechanical-energy
    variants are stored: mech_mean = <r_x>^2 / 2 and mech_raw = <r_x^2> / 2.
    """

    n: int
    mean_r: np.ndarray
    mean_p: np.ndarray
    pp: np.ndarray
    rr: np.ndarray
    energy: np.ndarray
    mech_mean: np.ndarray
    mech_raw: np.ndarray
    phi: np.ndarray
    current: np.ndarray
    j_left: float
    j_right: float
    jbar: float
    pbar: float
    pp_cross: np.ndarray = field(default=None, repr=False)   # <p_{x-1} p_x>, x=1..n
    pr_same: np.ndarray = field(default=None, repr=False)    # <p_x r_x>,     x=1..n
    pr_prev: np.ndarray = field(default=None, repr=False)    # <p_{x-1} r_x>, x=1..n


def profile_from_moments(sol: MomentSolution,
                         params: ChainParams | None = None) -> ProfileTable:
    """Fill the full profile table from exact moments.

    phi(x) = -(1/2 gamma)(<r_x^2> + <p_{x-1} p_x>)
             - (gamma/4)(<p_x^2> + <p_{x-1}^2>),  x = 1..n,
    whose discrete gradient equals the stationary current; jbar is taken from
    the left boundary formula (gamma_tilde/2)(T_minus - <p_0^2>).

    params is optional; the solution's operator set already carries the model
    constants and is cross-checked against params when both are given.
    """
    ops = sol.ops
    if params is not None and params.n != ops.n:
        raise ValueError("params.n does not match the solution's operators")
    n, g = ops.n, ops.gamma
    m, M = sol.m, sol.M
    rs = slice(0, n)
    ps = slice(n, 2 * n + 1)
    mean_r = m[rs].copy()
    mean_p = m[ps].copy()
    diag = np.diagonal(M)
    rr = diag[rs].copy()
    pp = diag[ps].copy()
    pp_cross = np.array([M[ip(n, x - 1), ip(n, x)] for x in range(1, n + 1)])
    pr_same = np.array([M[ip(n, x), ir(x)] for x in range(1, n + 1)])
    pr_prev = np.array([M[ip(n, x - 1), ir(x)] for x in range(1, n + 1)])
    pr_next = np.array([M[ip(n, x), ir(x + 1)] for x in range(0, n)])  # <p_x r_{x+1}>

    energy = 0.5 * pp.copy()
    energy[1:] += 0.5 * rr
    phi = -(0.5 / g) * (rr + pp_cross) - 0.25 * g * (pp[1:] + pp[:-1])
    current = -pr_next + 0.5 * g * (pp[:-1] - pp[1:])

    gt = ops.gamma_tilde
    tau = ops.tau_value
    j_left = 0.5 * gt * (ops.T_minus - pp[0])
    j_right = -0.5 * gt * (ops.T_plus - pp[-1]) - tau * mean_p[-1]
    return ProfileTable(
        n=n, mean_r=mean_r, mean_p=mean_p, pp=pp, rr=rr, energy=energy,
        mech_mean=0.5 * mean_r ** 2, mech_raw=0.5 * rr, phi=phi,
        current=current, j_left=float(j_left), j_right=float(j_right),
        jbar=float(j_left), pbar=float(mean_p.mean()),
        pp_cross=pp_cross, pr_same=pr_same, pr_prev=pr_prev)


@dataclass
class DecompositionReport:
    """Four-term split of the energy profile against a test function G.

    H_phi + H_nabla + H_corr + H_m equals (1/n) sum_x G(x/n) <E_x> over
    x = 1..n (identity, holds to rounding).
    """

    H_phi: float
    H_nabla: float
    H_corr: float
    H_m: float
    total: float


def _grid_values(G, n: int) -> np.ndarray:
    u = np.arange(1, n + 1) / n
    if callable(G):
        return np.asarray([float(G(v)) for v in u])
    G = np.asarray(G, dtype=float)
    if G.shape != (n,):
        raise ValueError(f"grid function must have length n={n} (sites 1..n)")
    return G


def energy_decomposition(sol: MomentSolution, G) -> DecompositionReport:
    """Energy-profile decomposition with prefactors
    -2 gamma/(1+gamma^2), gamma^2/(2(1+gamma^2)), -1/(1+gamma^2),
    (1-gamma^2)/(2(1+gamma^2)); the last term vanishes identically at gamma=1.

    G is a callable on [0,1] or an array sampled at x/n, x = 1..n.
    """
    n, g = sol.ops.n, sol.ops.gamma
    prof = profile_from_moments(sol)
    Gx = _grid_values(G, n)
    g2 = 1.0 + g * g
    dpp = prof.pp[1:] - prof.pp[:-1]
    H_phi = float(-(2.0 * g / g2) * np.dot(Gx, prof.phi) / n)
    H_nabla = float((g * g / (2.0 * g2)) * np.dot(Gx, dpp) / n)
    H_corr = float(-(1.0 / g2) * np.dot(Gx, prof.pp_cross) / n)
    if g == 1.0:
        H_m = 0.0
    else:
        H_m = float(((1.0 - g * g) / (2.0 * g2))
                    * np.dot(Gx, prof.pp[1:] - prof.rr) / n)
    total = float(np.dot(Gx, prof.energy[1:]) / n)
    return DecompositionReport(H_phi=H_phi, H_nabla=H_nabla, H_corr=H_corr,
                               H_m=H_m, total=total)


def equipartition_defect(sol: MomentSolution, G) -> float:
    """Probe of local equipartition:
    (1/n) sum_{x=2}^{n-2} (Delta_n G)_x (<p_x^2> - Var(r_x)), with the
    discrete Laplacian (Delta_n G)_x = n^2 (G_{x+1} + G_{x-1} - 2 G_x).

    Vanishing as n grows is conjectured (open) for gamma != 1; this reports
    the scalar without judging it.
    """
    n = sol.ops.n
    if callable(G):
        u = np.arange(0, n + 1) / n          # x = 0..n
        Gx = np.asarray([float(G(v)) for v in u])
        lap = np.full(n, np.nan)             # indexed by x - 1, x = 1..n
        lap[:n - 1] = n * n * (Gx[2:] - 2.0 * Gx[1:-1] + Gx[:-2])   # x = 1..n-1
    else:
        Gx = np.asarray(G, dtype=float)
        if Gx.shape != (n,):
            raise ValueError(f"grid function must have length n={n} (sites 1..n)")
        lap = np.full(n, np.nan)
        lap[1:-1] = n * n * (Gx[2:] - 2.0 * Gx[1:-1] + Gx[:-2])
    diag = np.diagonal(sol.M)
    var_r = diag[:n] - sol.m[:n] ** 2            # Var(r_x), x = 1..n
    pp = diag[n:]                                 # <p_x^2>,  x = 0..n
    xs = np.arange(2, n - 1)                      # x = 2..n-2
    return float(np.dot(lap[xs - 1], pp[xs] - var_r[xs - 1]) / n)
