"""Stochastic simulation of the chain by operator splitting.

One step composes exactly solvable substeps symmetrically (Strang):

    OU half | exchange sweep (dt/2) | velocity Verlet (dt)
            | reversed exchange sweep (dt/2) | OU half

Both noise substeps are exact in law: the thermostats are exact
Ornstein-Uhlenbeck updates, and each exchange pair rotates the two momenta by
a Normal(0, gamma h) angle, which realizes the pair-rotation diffusion while
conserving p_x^2 + p_{x+1}^2 identically.  Only the Verlet substep and the
splitting itself carry O(dt^2) weak bias.

Randomness comes from counter-based Philox streams keyed by (seed, replica),
so runs are reproducible and replicas independent regardless of scheduling.
NESS estimates carry batch-means standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import backend as _backend
from .chain import ChainParams, validate_state

__all__ = [
    "SimConfig",
    "EstimateTable",
    "InitialEnsemble",
    "SimulationError",
    "step_hamiltonian",
    "step_exchange",
    "step_thermostat",
    "run_ness",
    "run_transient",
]

CHUNK_STEPS = 512
SWEEP_ORDERS = ("even-odd", "left-to-right", "random-permutation")


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Run configuration; durations are microscopic times.

    Defaults (resolved against the chain parameters at run time):
    dt = 0.02 / max(1, gamma, gamma_tilde), t_burnin = 20 n^2,
    t_measure = 64 n^2, and 32 batches spread across replicas.
    """

    dt: float | None = None
    t_burnin: float | None = None
    t_measure: float | None = None
    n_replicas: int = 4
    seed: int = 0
    sweep_order: str = "even-odd"
    n_batches: int = 32
    backend: str | None = None

    def __post_init__(self):
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_measure is not None and self.t_measure <= 0:
            raise ValueError("t_measure must be positive")
        if self.n_replicas < 1:
            raise ValueError("n_replicas must be >= 1")
        if self.sweep_order not in SWEEP_ORDERS:
            raise ValueError(f"sweep_order must be one of {SWEEP_ORDERS}")

    def resolve(self, params: ChainParams) -> "SimConfig":
        n2 = params.n ** 2
        dt = self.dt if self.dt is not None else 0.02 / max(
            1.0, params.gamma, params.gamma_tilde)
        burn = self.t_burnin if self.t_burnin is not None else 20.0 * n2
        meas = self.t_measure if self.t_measure is not None else 64.0 * n2
        return replace(self, dt=dt, t_burnin=burn, t_measure=meas)


@dataclass
class EstimateTable:
    """Time-averaged NESS estimates with batch-means standard errors.

    Vector observables (site/bond indexed as in ProfileTable): mean_r, mean_p,
    pp, rr, pp_cross, pr_same, pr_prev, current; scalars j_left, j_right.
    se_* carry the matching standard errors.  flags lists quality problems
    (e.g. a batch count below 8).
    """

    n: int
    mean_r: np.ndarray
    mean_p: np.ndarray
    pp: np.ndarray
    rr: np.ndarray
    pp_cross: np.ndarray
    pr_same: np.ndarray
    pr_prev: np.ndarray
    current: np.ndarray
    j_left: float
    j_right: float
    se: dict = field(default_factory=dict)
    batch_count: int = 0
    flags: list = field(default_factory=list)
    config: SimConfig | None = None
    t_sim: float = 0.0

    def observable_pairs(self):
        """(name, estimate, se) triples for the tracked vector observables."""
        for name in ("mean_r", "mean_p", "pp", "rr", "pp_cross",
                     "pr_same", "pr_prev", "current"):
            yield name, getattr(self, name), self.se[name]


@dataclass(frozen=True)
class InitialEnsemble:
    """Product-Gaussian initial law with site-dependent means and variances."""

    mean_r: np.ndarray
    mean_p: np.ndarray
    var_r: np.ndarray
    var_p: np.ndarray

    @classmethod
    def gibbs(cls, n: int, T: float) -> "InitialEnsemble":
        return cls(mean_r=np.zeros(n), mean_p=np.zeros(n + 1),
                   var_r=np.full(n, T), var_p=np.full(n + 1, T))

    def sample(self, rng, size: int) -> np.ndarray:
        n = self.mean_r.size
        z = np.empty((size, 2 * n + 1))
        z[:, :n] = self.mean_r + np.sqrt(self.var_r) * rng.standard_normal((size, n))
        z[:, n:] = self.mean_p + np.sqrt(self.var_p) * rng.standard_normal((size, n + 1))
        return z


# ---------------------------------------------------------------------------
# public single-step operations (thin wrappers over the numpy kernel pieces)
# ---------------------------------------------------------------------------

def step_hamiltonian(z: np.ndarray, dt: float, tau_value: float) -> np.ndarray:
    """One velocity-Verlet step of the undamped linear flow."""
    from ._sim_numpy import verlet_step
    n = (len(z) - 1) // 2
    out = np.array(z, dtype=float).reshape(1, -1)
    verlet_step(out[:, :n], out[:, n:], dt, tau_value)
    return out[0]


def _order_array(n: int, sweep_order: str, rng=None) -> np.ndarray:
    if sweep_order == "even-odd":
        return np.concatenate([np.arange(0, n, 2), np.arange(1, n, 2)])
    if sweep_order == "left-to-right":
        return np.arange(n)
    if sweep_order == "random-permutation":
        if rng is None:
            raise ValueError("random-permutation sweeps need an rng")
        return rng.permutation(n)
    raise ValueError(f"unknown sweep order {sweep_order!r}")


def step_exchange(z: np.ndarray, dt: float, rng, gamma: float,
                  sweep_order: str = "even-odd") -> np.ndarray:
    """One full exchange sweep; each pair rotates by Normal(0, gamma dt).

    Exactly preserves p_x^2 + p_{x+1}^2 pair by pair.
    """
    from ._sim_numpy import exchange_sweep
    n = (len(z) - 1) // 2
    out = np.array(z, dtype=float).reshape(1, -1)
    order = _order_array(n, sweep_order, rng)
    theta = np.sqrt(gamma * dt) * rng.standard_normal((1, n))
    exchange_sweep(out[:, n:], theta, order)
    return out[0]


def step_thermostat(z: np.ndarray, dt: float, rng, gamma_tilde: float,
                    T_minus: float, T_plus: float) -> np.ndarray:
    """Exact Ornstein-Uhlenbeck update of the two boundary momenta over dt."""
    out = np.array(z, dtype=float)
    n = (len(z) - 1) // 2
    a = math.exp(-0.5 * gamma_tilde * dt)
    q = -math.expm1(-gamma_tilde * dt)
    xi = rng.standard_normal(2)
    out[n] = a * out[n] + math.sqrt(T_minus * q) * xi[0]
    out[-1] = a * out[-1] + math.sqrt(T_plus * q) * xi[1]
    return out


# ---------------------------------------------------------------------------
# chunked driver
# ---------------------------------------------------------------------------

def _philox(seed: int, rep: int, stream: int):
    """Counter-based generator keyed by (seed, replica, stream)."""
    return np.random.Generator(
        np.random.Philox(key=[np.uint64(seed), np.uint64((rep << 8) | stream)]))


def _replica_rngs(seed: int, n_replicas: int):
    noise = [_philox(seed, rep, 0) for rep in range(n_replicas)]
    perm = _philox(seed, 0, 1)
    return noise, perm


def _new_acc(R: int, n: int) -> dict:
    return {
        "r": np.zeros((R, n)), "p": np.zeros((R, n + 1)),
        "pp": np.zeros((R, n + 1)), "rr": np.zeros((R, n)),
        "ppx": np.zeros((R, n)), "prs": np.zeros((R, n)),
        "prp": np.zeros((R, n)), "j": np.zeros((R, n)),
        "bnd": np.zeros((R, 2)),
    }


class _Driver:
    """Advances an (R, 2n+1) block of replicas, chunk by chunk."""

    def __init__(self, params: ChainParams, cfg: SimConfig, z0: np.ndarray):
        self.params = params
        self.cfg = cfg
        self.z = np.ascontiguousarray(z0, dtype=float)
        self.R = self.z.shape[0]
        self.n = params.n
        self.step_index = 0
        self.noise_rngs, self.perm_rng = _replica_rngs(cfg.seed, self.R)
        self.advance = _backend.advance_chunk_fn(cfg.backend)
        self._fixed_order = None
        if cfg.sweep_order != "random-permutation":
            self._fixed_order = _order_array(self.n, cfg.sweep_order)

    def _orders(self, K: int) -> np.ndarray:
        if self._fixed_order is not None:
            return np.ascontiguousarray(
                np.broadcast_to(self._fixed_order, (K, self.n)), dtype=np.int64)
        out = np.empty((K, self.n), dtype=np.int64)
        for k in range(K):
            out[k] = self.perm_rng.permutation(self.n)
        return out

    def _taus(self, K: int) -> np.ndarray:
        p = self.params
        if p.tau_is_constant:
            return np.full(K, p.tau(0.0))
        n2 = p.n ** 2
        s0 = self.step_index * self.cfg.dt
        t_mid = (s0 + (np.arange(K) + 0.5) * self.cfg.dt) / n2
        return np.array([p.tau(t) for t in t_mid])

    def run(self, n_steps: int, acc: dict | None = None) -> None:
        cfg, p = self.cfg, self.params
        width = 2 * self.n + 4
        done = 0
        while done < n_steps:
            K = min(CHUNK_STEPS, n_steps - done)
            normals = np.empty((self.R, K, width))
            for rep in range(self.R):
                normals[rep] = self.noise_rngs[rep].standard_normal((K, width))
            self.advance(self.z, normals, self._orders(K), self._taus(K),
                         cfg.dt, p.gamma, p.gamma_tilde, p.T_minus, p.T_plus,
                         acc)
            done += K
            self.step_index += K
            if not np.all(np.isfinite(self.z)):
                raise SimulationError(
                    f"non-finite state at microscopic step {self.step_index}")


def _finalize(batch_means: dict, n: int, cfg: SimConfig,
              t_sim: float) -> EstimateTable:
    """Point estimates + SE from stacked batch means (axis 0 = batches)."""
    nb = next(iter(batch_means.values())).shape[0]
    est, se = {}, {}
    for key, arr in batch_means.items():
        est[key] = arr.mean(axis=0)
        if nb > 1:
            se[key] = arr.std(axis=0, ddof=1) / math.sqrt(nb)
        else:
            se[key] = np.full_like(est[key], np.nan)
    flags = []
    if nb < 8:
        flags.append(f"batch count {nb} below 8; standard errors unreliable")
    names = {"r": "mean_r", "p": "mean_p", "pp": "pp", "rr": "rr",
             "ppx": "pp_cross", "prs": "pr_same", "prp": "pr_prev",
             "j": "current"}
    table = EstimateTable(
        n=n,
        **{names[k]: est[k] for k in names},
        j_left=float(est["bnd"][0]), j_right=float(est["bnd"][1]),
        se={**{names[k]: se[k] for k in names},
            "j_left": float(se["bnd"][0]), "j_right": float(se["bnd"][1])},
        batch_count=nb, flags=flags, config=cfg, t_sim=t_sim)
    return table


def run_ness(params: ChainParams, cfg: SimConfig | None = None) -> EstimateTable:
    """Estimate the NESS by long-run time averages across replicas.

    After burn-in, every step contributes to per-replica batch sums; batch
    means across all replicas give the point estimates and standard errors.
    Initial condition: product Gibbs at temperature (T_- + T_+)/2, zero mean.

    Raises:
        SimulationError: non-finite state (overflow) with the step index.
    """
    if not params.tau_is_constant:
        raise ValueError("run_ness requires a constant tension")
    cfg = (cfg or SimConfig()).resolve(params)
    n, R = params.n, cfg.n_replicas
    batches_per_rep = max(2, int(round(cfg.n_batches / R)))
    steps_batch = max(1, int(round(cfg.t_measure / batches_per_rep / cfg.dt)))
    steps_burn = int(round(cfg.t_burnin / cfg.dt))

    init_rng = _philox(cfg.seed, 0, 2)
    Tbar = 0.5 * (params.T_minus + params.T_plus)
    z0 = InitialEnsemble.gibbs(n, Tbar).sample(init_rng, R)
    driver = _Driver(params, cfg, z0)
    driver.run(steps_burn)

    per_batch = []
    for _ in range(batches_per_rep):
        acc = _new_acc(R, n)
        driver.run(steps_batch, acc)
        per_batch.append({k: v / steps_batch for k, v in acc.items()})
    # stack to (R * batches, ...) batch means
    batch_means = {k: np.concatenate([pb[k] for pb in per_batch], axis=0)
                   for k in per_batch[0]}
    t_sim = (steps_burn + batches_per_rep * steps_batch) * cfg.dt
    return _finalize(batch_means, n, cfg, t_sim)


def run_transient(params: ChainParams, cfg: SimConfig,
                  z0_law: InitialEnsemble, t_end: float,
                  t_out) -> list[EstimateTable]:
    """Ensemble averages of the profile observables at macroscopic times.

    The ensemble members are cfg.n_replicas independent draws from z0_law;
    snapshot estimates at each requested time carry across-member standard
    errors.  Tension schedules are evaluated at macroscopic time s / n^2.
    """
    cfg = cfg.resolve(params)
    n, R = params.n, cfg.n_replicas
    n2 = n * n
    t_out = sorted(float(t) for t in t_out)
    if t_out[0] < 0 or t_out[-1] > t_end + 1e-12:
        raise ValueError("t_out must lie in [0, t_end]")
    init_rng = _philox(cfg.seed, 0, 2)
    z0 = z0_law.sample(init_rng, R)
    driver = _Driver(params, cfg, z0)
    out = []
    prev_steps = 0
    for t in t_out:
        target = int(round(t * n2 / cfg.dt))
        driver.run(target - prev_steps)
        prev_steps = target
        acc = _new_acc(R, n)
        # snapshot: treat each member as one "batch" of length one step
        z = driver.z
        r, p = z[:, :n], z[:, n:]
        acc["r"] += r
        acc["p"] += p
        acc["pp"] += p * p
        acc["rr"] += r * r
        acc["ppx"] += p[:, :-1] * p[:, 1:]
        acc["prs"] += p[:, 1:] * r
        acc["prp"] += p[:, :-1] * r
        tau = params.tau(t)
        acc["j"] += -p[:, :-1] * r + 0.5 * params.gamma * (p[:, :-1] ** 2 - p[:, 1:] ** 2)
        acc["bnd"][:, 0] += 0.5 * params.gamma_tilde * (params.T_minus - p[:, 0] ** 2)
        acc["bnd"][:, 1] += (-0.5 * params.gamma_tilde * (params.T_plus - p[:, -1] ** 2)
                             - tau * p[:, -1])
        table = _finalize(acc, n, cfg, t_sim=t * n2)
        table.flags.append(f"snapshot at macroscopic t={t}")
        out.append(table)
    return out
