"""Simulator substeps against exact-law oracles, plus NESS runs vs the solver."""

import numpy as np
import pytest

from heatchain import (ChainParams, SimConfig, profile_from_moments, run_ness,
                       run_transient, stationary_solution, step_exchange,
                       step_hamiltonian, step_thermostat)
from heatchain.chain import ip
from heatchain.operators import hamiltonian_part
from heatchain.sim import InitialEnsemble, _order_array


def rng_for(seed):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# exchange substep
# ---------------------------------------------------------------------------

def test_exchange_conserves_pair_kinetic_energy():
    n = 8
    rng = rng_for(1)
    z = rng.standard_normal(2 * n + 1)
    before = z[n:] ** 2
    out = step_exchange(z, 0.05, rng, gamma=1.4)
    # total kinetic energy conserved to machine precision by a full sweep
    assert np.sum(out[n:] ** 2) == pytest.approx(np.sum(before), rel=1e-13)


def test_exchange_two_site_moment_map():
    """Empirical one-substep update of (<p1^2>, <p1 p2>) matches the exact
    2-site map: cross and difference moments contract by e^{-2 gamma h}."""
    gamma, h, N = 1.3, 0.08, 1_000_000
    rng = rng_for(2)
    # ensemble with deliberate cross correlation on a single pair (n=2 chain,
    # only pair (1,2) gets angle draws here)
    p1 = rng.standard_normal(N) * 1.2
    p2 = 0.6 * p1 + 0.8 * rng.standard_normal(N)
    theta = np.sqrt(gamma * h) * rng.standard_normal(N)
    c, s = np.cos(theta), np.sin(theta)
    q1 = c * p1 - s * p2
    q2 = s * p1 + c * p2
    decay = np.exp(-2 * gamma * h)
    # exact maps
    sum0 = np.mean(p1 ** 2 + p2 ** 2)
    cross_want = decay * np.mean(p1 * p2)
    diff_want = decay * np.mean(p1 ** 2 - p2 ** 2)
    cross_got = np.mean(q1 * q2)
    diff_got = np.mean(q1 ** 2 - q2 ** 2)
    se_cross = np.std(q1 * q2, ddof=1) / np.sqrt(N)
    se_diff = np.std(q1 ** 2 - q2 ** 2, ddof=1) / np.sqrt(N)
    assert abs(cross_got - cross_want) < 4 * se_cross
    assert abs(diff_got - diff_want) < 4 * se_diff
    assert np.mean(q1 ** 2 + q2 ** 2) == pytest.approx(sum0, rel=1e-12)


def test_exchange_cross_moment_decay_rate():
    """Iterated sweeps: <p_x p_{x+1}> on an isolated pair decays at rate
    2 gamma (matched against the 2-site moment ODE over many steps)."""
    gamma, h, steps, N = 0.9, 0.05, 40, 200_000
    rng = rng_for(3)
    p = np.empty((N, 2))
    p[:, 0] = rng.standard_normal(N)
    p[:, 1] = 0.8 * p[:, 0] + 0.6 * rng.standard_normal(N)
    c0 = np.mean(p[:, 0] * p[:, 1])
    for _ in range(steps):
        theta = np.sqrt(gamma * h) * rng.standard_normal(N)
        c, s = np.cos(theta), np.sin(theta)
        a = p[:, 0].copy()
        p[:, 0] = c * a - s * p[:, 1]
        p[:, 1] = s * a + c * p[:, 1]
    want = c0 * np.exp(-2 * gamma * h * steps)
    got = np.mean(p[:, 0] * p[:, 1])
    se = np.std(p[:, 0] * p[:, 1], ddof=1) / np.sqrt(N)
    assert abs(got - want) < 4 * se


def test_sweep_orders():
    n = 9
    eo = _order_array(n, "even-odd")
    assert sorted(eo.tolist()) == list(range(n))
    assert all(k % 2 == 0 for k in eo[:5]) and all(k % 2 == 1 for k in eo[5:])
    assert _order_array(n, "left-to-right").tolist() == list(range(n))
    perm = _order_array(n, "random-permutation", rng_for(7))
    assert sorted(perm.tolist()) == list(range(n))


# ---------------------------------------------------------------------------
# thermostat substep
# ---------------------------------------------------------------------------

def test_thermostat_zero_temperature_decay():
    n = 4
    z = np.zeros(2 * n + 1)
    z[ip(n, 0)] = 2.0
    z[ip(n, n)] = -1.0
    out = step_thermostat(z, 0.3, rng_for(4), gamma_tilde=1.5,
                          T_minus=0.0, T_plus=0.0)
    decay = np.exp(-0.5 * 1.5 * 0.3)
    assert out[ip(n, 0)] == pytest.approx(2.0 * decay, rel=1e-12)
    assert out[ip(n, n)] == pytest.approx(-1.0 * decay, rel=1e-12)
    assert np.abs(out[:n]).max() == 0.0


def test_thermostat_relaxes_to_bath_variance():
    """Iterating only the OU update drives <p_0^2> to T_minus geometrically."""
    n, gt, Tm, h, N = 2, 1.1, 0.7, 0.25, 400_000
    rng = rng_for(5)
    p0 = np.zeros(N)
    a = np.exp(-0.5 * gt * h)
    q = np.sqrt(Tm * -np.expm1(-gt * h))
    second = [0.0]
    for _ in range(30):
        p0 = a * p0 + q * rng.standard_normal(N)
        second.append(np.mean(p0 ** 2))
    # geometric approach: errors contract by e^{-gt h} each step
    errs = np.abs(np.array(second) - Tm)
    ratios = errs[1:10] / errs[0:9]
    assert np.allclose(ratios, np.exp(-gt * h), atol=0.02)
    se = np.std(p0 ** 2, ddof=1) / np.sqrt(N)
    assert abs(second[-1] - Tm) < 4 * se


# ---------------------------------------------------------------------------
# Verlet substep
# ---------------------------------------------------------------------------

def test_verlet_zero_state_stays_zero():
    z = np.zeros(2 * 4 + 1)
    assert np.abs(step_hamiltonian(z, 0.02, 0.0)).max() == 0.0


def test_verlet_energy_conservation_order():
    """tau=0: energy error per step is O(dt^2) (halving dt quarters it)."""
    n = 6
    rng = rng_for(6)
    z0 = rng.standard_normal(2 * n + 1)
    e0 = 0.5 * np.dot(z0, z0)

    def energy_drift(dt, steps):
        z = z0.copy()
        worst = 0.0
        for _ in range(steps):
            z = step_hamiltonian(z, dt, 0.0)
            worst = max(worst, abs(0.5 * np.dot(z, z) - e0))
        return worst

    d1 = energy_drift(0.05, 400)
    d2 = energy_drift(0.025, 800)
    assert d1 / d2 > 3.0


def test_verlet_slow_mode_frequency():
    """Oscillation of the slowest free mode matches the eigen-oracle to 0.5%."""
    n = 4
    A = hamiltonian_part(n)
    lam, vec = np.linalg.eig(A)
    freqs = np.abs(lam.imag)
    omega = np.min(freqs[freqs > 1e-9])
    k = int(np.argmin(np.abs(freqs - omega)))
    v = vec[:, k]
    z = np.real(v)
    z /= np.linalg.norm(z)
    dt = 2 * np.pi / omega / 400
    # phase of the complex mode coefficient advances by omega per unit time
    w = np.conj(v) / np.vdot(v, v)
    steps = 1200
    zs = z.copy()
    angles = []
    coef_prev = np.vdot(np.conj(w), zs)
    for _ in range(steps):
        zs = step_hamiltonian(zs, dt, 0.0)
        coef = np.vdot(np.conj(w), zs)
        angles.append(np.angle(coef / coef_prev))
        coef_prev = coef
    omega_sim = abs(np.mean(angles)) / dt
    assert omega_sim == pytest.approx(omega, rel=5e-3)


def test_energy_bookkeeping():
    """Per-step energy balance: Delta E = tau work + thermostat heat, with
    O(dt^2) accumulated defect; exchange sweeps contribute exactly zero."""
    params = ChainParams(n=6, gamma=1.0, gamma_tilde=1.2, tau_plus=0.9,
                         T_minus=0.8, T_plus=1.3)
    n = params.n

    def run(dt, steps, seed):
        rng = rng_for(seed)
        z = np.sqrt(1.0) * rng.standard_normal(2 * n + 1)
        defect = 0.0
        for _ in range(steps):
            e_start = 0.5 * np.dot(z, z)
            z1 = step_thermostat(z, 0.5 * dt, rng, params.gamma_tilde,
                                 params.T_minus, params.T_plus)
            heat = 0.5 * np.dot(z1, z1) - e_start
            ke = np.sum(z1[n:] ** 2)
            z2 = step_exchange(z1, 0.5 * dt, rng, params.gamma)
            assert np.sum(z2[n:] ** 2) == pytest.approx(ke, rel=1e-12)
            # Verlet work: tau * Delta q_n = tau * dt * p_n(after first kick)
            pn_mid = z2[ip(n, n)] + 0.5 * dt * (0.9 - z2[n - 1])
            work = 0.9 * dt * pn_mid
            z3 = step_hamiltonian(z2, dt, 0.9)
            z4 = step_exchange(z3, 0.5 * dt, rng, params.gamma)
            e_mid = 0.5 * np.dot(z4, z4)
            z = step_thermostat(z4, 0.5 * dt, rng, params.gamma_tilde,
                                params.T_minus, params.T_plus)
            heat += 0.5 * np.dot(z, z) - e_mid
            defect += (0.5 * np.dot(z, z) - e_start) - heat - work
        return abs(defect)

    d1 = run(0.04, 500, 11)
    d2 = run(0.02, 1000, 11)
    assert d2 < d1 / 2.0          # between O(dt) and O(dt^2) contraction
    assert d1 < 0.05


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------

def test_reproducibility_and_seed_sensitivity():
    p = ChainParams(n=6, tau_plus=0.5, T_minus=0.9, T_plus=1.2)
    cfg = SimConfig(t_burnin=20, t_measure=200, n_replicas=2, seed=42)
    a = run_ness(p, cfg)
    b = run_ness(p, cfg)
    assert all(np.array_equal(getattr(a, k), getattr(b, k))
               for k in ("mean_r", "mean_p", "pp", "rr", "current"))
    c = run_ness(p, SimConfig(t_burnin=20, t_measure=200, n_replicas=2, seed=43))
    assert not np.array_equal(a.pp, c.pp)


def test_equilibrium_ness_run():
    """tau=0, T-=T+=1 at n=8: second moments 1 and cross moments 0 within 3 SE."""
    p = ChainParams(n=8, gamma=1.0, gamma_tilde=1.0, tau_plus=0.0,
                    T_minus=1.0, T_plus=1.0)
    est = run_ness(p, SimConfig(n_replicas=4, seed=1, t_measure=30 * 64.0))
    assert est.batch_count >= 8
    for arr, se, want in [(est.pp, est.se["pp"], 1.0),
                          (est.rr, est.se["rr"], 1.0),
                          (est.pp_cross, est.se["pp_cross"], 0.0),
                          (est.pr_same, est.se["pr_same"], 0.0)]:
        miss = np.abs(arr - want) > 3 * se
        assert miss.mean() <= 0.11, (arr, se)


def test_ness_matches_exact_solver():
    """n=16 default-ish run: >= 95% of tracked observables within 3 SE."""
    p = ChainParams(n=16, gamma=1.0, gamma_tilde=1.0, tau_plus=1.0,
                    T_minus=1.0, T_plus=2.0)
    est = run_ness(p, SimConfig(seed=3))
    prof = profile_from_moments(stationary_solution(p))
    exact = {"mean_r": prof.mean_r, "mean_p": prof.mean_p, "pp": prof.pp,
             "rr": prof.rr, "pp_cross": prof.pp_cross}
    hits = total = 0
    for name, want in exact.items():
        got = getattr(est, name)
        se = np.maximum(est.se[name], 1e-12)
        hits += int(np.sum(np.abs(got - want) <= 3 * se))
        total += want.size
    assert total >= 80
    assert hits / total >= 0.95


def test_ness_current_consistency():
    """Estimated bulk currents equal the boundary formula within errors."""
    p = ChainParams(n=8, gamma=1.0, gamma_tilde=1.0, tau_plus=1.0,
                    T_minus=1.0, T_plus=2.0)
    est = run_ness(p, SimConfig(seed=9, t_measure=80 * 64.0))
    jbar_boundary = 0.5 * p.gamma_tilde * (p.T_minus - est.pp[0])
    se = 3 * (np.abs(est.se["current"]).max()
              + 0.5 * p.gamma_tilde * est.se["pp"][0])
    assert np.abs(est.current - jbar_boundary).max() < se + 3 * np.abs(
        est.se["current"]).max()


def test_weak_order_bias_below_noise():
    """NESS estimates at dt and dt/2 agree within twice the dt-run's SE."""
    p = ChainParams(n=8, gamma=1.0, gamma_tilde=1.0, tau_plus=0.8,
                    T_minus=0.9, T_plus=1.4)
    base = SimConfig(seed=17, n_replicas=4, t_measure=60 * 64.0)
    a = run_ness(p, base)
    b = run_ness(p, SimConfig(seed=18, n_replicas=4, t_measure=60 * 64.0,
                              dt=a.config.dt / 2))
    for key in ("pp", "rr"):
        se = np.hypot(a.se[key], b.se[key])
        frac_ok = np.mean(np.abs(getattr(a, key) - getattr(b, key)) <= 2.5 * se)
        assert frac_ok >= 0.9


def test_run_transient_stationary_start():
    """Ensemble initialized at equilibrium stays flat within CI."""
    T = 1.0
    p = ChainParams(n=8, gamma=1.0, gamma_tilde=1.0, tau_plus=0.0,
                    T_minus=T, T_plus=T)
    law = InitialEnsemble.gibbs(p.n, T)
    tables = run_transient(p, SimConfig(seed=21, n_replicas=4000), law,
                           t_end=0.2, t_out=[0.0, 0.2])
    for est in tables:
        miss = np.abs(est.pp - T) > 3 * est.se["pp"]
        assert miss.mean() <= 0.15


def test_simulation_error_on_blowup():
    from heatchain.sim import SimulationError
    p = ChainParams(n=6, gamma=1.0, tau_plus=0.0)
    cfg = SimConfig(dt=3.0, t_burnin=0.0, t_measure=3000.0, n_replicas=1,
                    seed=0)
    with pytest.raises((SimulationError, ValueError)):
        run_ness(p, cfg)
