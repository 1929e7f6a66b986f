"""Macroscopic coupled diffusion for stretch and energy on [0, 1].

    d_t r = (1/gamma) d_uu r
    d_t e = 1/2 d_uu [ (1/gamma + gamma) e + 1/2 (1/gamma - gamma) r^2 ]

with Dirichlet data r(t,0)=0, r(t,1)=tau(t), e(t,0)=T_minus,
e(t,1)=T_plus + tau(t)^2/2.  Crank-Nicolson in the diffusive terms; the r^2
flux uses the already-computed stretch averaged over the two time levels.

The closed-form stationary profiles (linear stretch, parabolic thermal
energy) are polynomials of degree <= 2, hence exact fixed points of the
discrete schemes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .chain import ChainParams

__all__ = [
    "MacroFields",
    "MacroSolution",
    "StationaryProfiles",
    "solve_stretch",
    "solve_energy",
    "solve_macro",
    "thermal_split",
    "stationary_profiles",
]

# Crank-Nicolson is unconditionally stable but loses the discrete maximum
# principle when kappa dt / du^2 grows beyond ~1; flagged, not fatal.
MESH_RATIO_THRESHOLD = 1.0


@dataclass
class MacroFields:
    """One time slice of the macroscopic fields on the uniform grid."""

    u: np.ndarray
    r: np.ndarray
    e: np.ndarray
    t: float
    gamma: float
    r_prev: np.ndarray | None = field(default=None, repr=False)
    e_prev: np.ndarray | None = field(default=None, repr=False)
    dt_prev: float | None = field(default=None, repr=False)

    @property
    def e_mech(self) -> np.ndarray:
        return 0.5 * self.r ** 2

    @property
    def e_th(self) -> np.ndarray:
        return self.e - self.e_mech


@dataclass
class MacroSolution:
    """Stored trajectory of one solve: times plus R/E histories (rows = times)."""

    times: np.ndarray
    u: np.ndarray
    R: np.ndarray
    E: np.ndarray | None
    gamma: float
    mesh_ratio: float
    mesh_flagged: bool

    def index_of(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} not stored (nearest {self.times[k]})")
        return k

    def fields_at(self, t: float) -> MacroFields:
        if self.E is None:
            raise ValueError("energy field was not solved for this trajectory")
        k = self.index_of(t)
        prev = k - 1 if k > 0 else None
        return MacroFields(
            u=self.u, r=self.R[k], e=self.E[k], t=float(self.times[k]),
            gamma=self.gamma,
            r_prev=None if prev is None else self.R[prev],
            e_prev=None if prev is None else self.E[prev],
            dt_prev=None if prev is None else float(self.times[k] - self.times[prev]),
        )


def _laplacian(v: np.ndarray, du: float) -> np.ndarray:
    """Second difference on interior nodes (length m-1)."""
    return (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (du * du)


def _cn_factor(kappa: float, dt: float, du: float, m: int):
    """Banded LHS of (I - dt/2 kappa Lap) on interior nodes."""
    lam = 0.5 * kappa * dt / (du * du)
    ab = np.zeros((3, m - 1))
    ab[0, 1:] = -lam
    ab[1, :] = 1.0 + 2.0 * lam
    ab[2, :-1] = -lam
    return ab, lam


def _cn_step(v, bc0, bc1, ab, lam, src=None):
    """One Crank-Nicolson step with Dirichlet data (bc at the NEW level)."""
    rhs = v[1:-1] + lam * (v[2:] - 2.0 * v[1:-1] + v[:-2])
    rhs[0] += lam * bc0
    rhs[-1] += lam * bc1
    if src is not None:
        rhs += src
    out = np.empty_like(v)
    out[0], out[-1] = bc0, bc1
    out[1:-1] = solve_banded((1, 1), ab, rhs)
    return out


def _check_mesh(kappa: float, dt: float, du: float) -> tuple[float, bool]:
    ratio = kappa * dt / (du * du)
    flagged = ratio > MESH_RATIO_THRESHOLD
    if flagged:
        warnings.warn(
            f"dt/du^2 ratio {ratio:.3g} exceeds {MESH_RATIO_THRESHOLD}; "
            "Crank-Nicolson stays stable but the discrete maximum principle "
            "may fail", stacklevel=3)
    return ratio, flagged


def solve_stretch(params: ChainParams, r0: np.ndarray, t_end: float,
                  dt: float, m: int) -> MacroSolution:
    """Crank-Nicolson solve of d_t r = (1/gamma) d_uu r.

    Args:
        params: carries gamma and the tension schedule (boundary r(t,1)).
        r0: initial grid function on m+1 nodes, compatible with the t=0
            boundary values.
        t_end, dt: macroscopic horizon and step (last step shortened to hit
            t_end exactly).
        m: number of cells (m+1 nodes).
    """
    u = np.arange(m + 1) / m
    du = 1.0 / m
    kappa = 1.0 / params.gamma
    r = np.asarray(r0, dtype=float).copy()
    if r.shape != (m + 1,):
        raise ValueError(f"r0 must have {m + 1} nodes")
    ratio, flagged = _check_mesh(kappa, dt, du)
    ab, lam = _cn_factor(kappa, dt, du, m)
    steps = int(np.ceil(t_end / dt - 1e-12))
    times = [0.0]
    R = [r.copy()]
    t = 0.0
    for k in range(steps):
        h = min(dt, t_end - t)
        if abs(h - dt) > 1e-14 * max(dt, 1.0):     # shortened final step
            ab_h, lam_h = _cn_factor(kappa, h, du, m)
        else:
            ab_h, lam_h = ab, lam
        t_new = t + h
        r = _cn_step(r, 0.0, params.tau(t_new), ab_h, lam_h)
        t = t_new
        times.append(t)
        R.append(r.copy())
    return MacroSolution(times=np.array(times), u=u, R=np.array(R), E=None,
                         gamma=params.gamma, mesh_ratio=ratio,
                         mesh_flagged=flagged)


def solve_energy(params: ChainParams, e0: np.ndarray,
                 stretch: MacroSolution) -> MacroSolution:
    """Semi-implicit solve of the energy equation on the stretch's mesh.

    Diffusion of e is Crank-Nicolson; the r^2 flux term
    (1/4)(1/gamma - gamma) d_uu r^2 is evaluated from the known stretch,
    averaged over the two time levels.
    """
    g = params.gamma
    m = stretch.u.size - 1
    du = 1.0 / m
    kappa = 0.5 * (1.0 / g + g)
    e = np.asarray(e0, dtype=float).copy()
    if e.shape != (m + 1,):
        raise ValueError(f"e0 must have {m + 1} nodes")
    dt0 = float(stretch.times[1] - stretch.times[0]) if stretch.times.size > 1 else 0.0
    ratio, flagged = _check_mesh(kappa, dt0, du) if dt0 else (0.0, False)
    E = [e.copy()]
    coef = 0.25 * (1.0 / g - g)
    times = stretch.times
    for k in range(len(times) - 1):
        h = float(times[k + 1] - times[k])
        ab, lam = _cn_factor(kappa, h, du, m)
        rsq_old = stretch.R[k] ** 2
        rsq_new = stretch.R[k + 1] ** 2
        src = 0.5 * h * coef * (_laplacian(rsq_old, du) + _laplacian(rsq_new, du))
        t_new = float(times[k + 1])
        bc1 = params.T_plus + 0.5 * params.tau(t_new) ** 2
        e = _cn_step(e, params.T_minus, bc1, ab, lam, src=src)
        E.append(e.copy())
    return MacroSolution(times=times, u=stretch.u, R=stretch.R, E=np.array(E),
                         gamma=g, mesh_ratio=max(ratio, stretch.mesh_ratio),
                         mesh_flagged=flagged or stretch.mesh_flagged)


def solve_macro(params: ChainParams, r0: np.ndarray, e0: np.ndarray,
                t_end: float, dt: float, m: int) -> MacroSolution:
    """Convenience driver: stretch first, then energy on the same mesh."""
    stretch = solve_stretch(params, r0, t_end, dt, m)
    return solve_energy(params, e0, stretch)


def thermal_split(fields: MacroFields):
    """Split e into mechanical r^2/2 and thermal parts, with a residual check.

    The residual evaluates d_t e_th - (1/2)(1/gamma + gamma) d_uu e_th
    - (1/gamma) (d_u r)^2 on interior nodes; the time derivative uses the
    stored previous slice when available and is dropped otherwise (stationary
    form).
    """
    e_mech = fields.e_mech
    e_th = fields.e_th
    g = fields.gamma
    du = float(fields.u[1] - fields.u[0])
    dr = (fields.r[2:] - fields.r[:-2]) / (2.0 * du)
    rhs = 0.5 * (1.0 / g + g) * _laplacian(e_th, du) + (dr ** 2) / g
    if fields.e_prev is not None and fields.dt_prev:
        e_th_prev = fields.e_prev - 0.5 * fields.r_prev ** 2
        dt_term = (e_th[1:-1] - e_th_prev[1:-1]) / fields.dt_prev
    else:
        dt_term = np.zeros_like(rhs)
    residual = dt_term - rhs
    return e_mech, e_th, residual


# ---------------------------------------------------------------------------
# closed-form stationary profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StationaryProfiles:
    """Closed-form stationary solution of the macroscopic system.

    r_ss(u) = tau u;  e_th_ss(u) = tau^2/(1+gamma^2) u(1-u) + (T_+ - T_-) u + T_-.

    J_ss is the macroscopic stationary current limit of n jbar.  u_max is the
    reported maximum-temperature location
        (1/2 + (1+gamma^2)(T_+ - T_-)/tau^2) ^ 1     (for T_+ >= T_-),
    mirrored through u -> 1-u when T_- > T_+, with u_max = 1 (resp. 0) when
    tau = 0.  u_peak is the argmax of the e_th_ss parabola itself, clipped to
    [0, 1]; the two agree when T_+ = T_- and differ by a factor 2 in the
    offset otherwise (u_peak is what the finite-n profile converges to).
    """

    gamma: float
    tau: float
    T_minus: float
    T_plus: float
    J_ss: float
    u_max: float
    u_peak: float
    e_th_max: float
    interior: bool

    def r_ss(self, u):
        return self.tau * np.asarray(u, dtype=float)

    def e_th_ss(self, u):
        u = np.asarray(u, dtype=float)
        a = self.tau ** 2 / (1.0 + self.gamma ** 2)
        return a * u * (1.0 - u) + (self.T_plus - self.T_minus) * u + self.T_minus

    def e_ss(self, u):
        return self.e_th_ss(u) + 0.5 * self.r_ss(u) ** 2


def stationary_profiles(params: ChainParams) -> StationaryProfiles:
    """Evaluate the closed-form stationary profiles and current.

    J_ss = -1/2 (1/gamma + gamma)(T_+ - T_-) - tau^2 / (2 gamma); the current
    can flow uphill (same sign as the temperature gradient) once
    tau^2 > (1 + gamma^2) |T_+ - T_-| with the tension on the cold side.
    """
    if not params.tau_is_constant:
        raise ValueError("stationary profiles require a constant tension")
    g = params.gamma
    tau = params.tau(0.0)
    Tm, Tp = params.T_minus, params.T_plus
    dT = Tp - Tm
    J_ss = -0.5 * (1.0 / g + g) * dT - tau ** 2 / (2.0 * g)

    g2 = 1.0 + g * g
    if tau == 0.0:
        u_max = 1.0 if Tp >= Tm else 0.0
        u_peak = u_max
        interior = False
        e_th_max = max(Tm, Tp)
    else:
        if Tp >= Tm:
            u_max = min(0.5 + g2 * dT / tau ** 2, 1.0)
        else:
            u_max = 1.0 - min(0.5 + g2 * (-dT) / tau ** 2, 1.0)
        u_peak = min(max(0.5 + g2 * dT / (2.0 * tau ** 2), 0.0), 1.0)
        interior = 2.0 * g2 * abs(dT) <= tau ** 2
        if interior:
            e_th_max = abs(dT) / 2.0 + min(Tm, Tp) + tau ** 2 / (4.0 * g2)
        else:
            e_th_max = max(Tm, Tp)
    return StationaryProfiles(gamma=g, tau=tau, T_minus=Tm, T_plus=Tp,
                              J_ss=float(J_ss), u_max=float(u_max),
                              u_peak=float(u_peak), e_th_max=float(e_th_max),
                              interior=bool(interior))
