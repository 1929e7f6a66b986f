"""Macroscopic solvers: fixed points, convergence order, closed-form profiles."""

import numpy as np
import pytest

from heatchain import ChainParams, solve_energy, solve_macro, solve_stretch
from heatchain.pde import stationary_profiles, thermal_split

# several tests run coarse dt on purpose (CN is unconditionally stable)
pytestmark = pytest.mark.filterwarnings("ignore:dt/du\\^2 ratio")


def grid(m):
    return np.arange(m + 1) / m


def test_stretch_stationary_fixed_point():
    p = ChainParams(n=4, gamma=1.3, tau_plus=0.9)
    m = 128
    sol = solve_stretch(p, 0.9 * grid(m), t_end=0.5, dt=1e-3, m=m)
    assert np.abs(sol.R[-1] - 0.9 * grid(m)).max() < 1e-10


def test_stretch_relaxes_to_linear_profile():
    p = ChainParams(n=4, gamma=1.0, tau_plus=0.8)
    m = 128
    r0 = np.zeros(m + 1)
    r0[-1] = 0.8
    sol = solve_stretch(p, r0, t_end=5.0, dt=2e-3, m=m)
    assert np.abs(sol.R[-1] - 0.8 * grid(m)).max() < 1e-6


def test_stretch_second_order_self_convergence():
    """Against the separable exact solution tau u + e^{-pi^2 t/g} sin(pi u)."""
    p = ChainParams(n=4, gamma=1.5, tau_plus=0.5)
    t_end = 0.1
    errs = []
    for m in (32, 64, 128):
        u = grid(m)
        r0 = 0.5 * u + np.sin(np.pi * u)
        dt = 0.2 / m ** 1.0 * 0.05          # halve dt with each m doubling
        sol = solve_stretch(p, r0, t_end=t_end, dt=dt, m=m)
        exact = 0.5 * u + np.exp(-np.pi ** 2 * t_end / 1.5) * np.sin(np.pi * u)
        errs.append(np.abs(sol.R[-1] - exact).max())
    assert errs[0] / errs[1] > 3.0
    assert errs[1] / errs[2] > 3.0


def test_stretch_maximum_principle():
    """No source: solution bounded by initial + boundary data (mesh ratio <= 1)."""
    p = ChainParams(n=4, gamma=1.0, tau_plus=0.6)
    m = 64
    rng = np.random.default_rng(5)
    r0 = rng.uniform(-1.0, 2.0, m + 1)
    r0[0], r0[-1] = 0.0, 0.6
    dt = 0.9 / m ** 2                      # kappa dt/du^2 <= 1
    sol = solve_stretch(p, r0, t_end=0.05, dt=dt, m=m)
    lo = min(r0.min(), 0.0, 0.6)
    hi = max(r0.max(), 0.0, 0.6)
    assert sol.R.min() >= lo - 1e-12
    assert sol.R.max() <= hi + 1e-12


def test_stretch_mesh_ratio_report():
    p = ChainParams(n=4, gamma=1.0, tau_plus=0.0)
    with pytest.warns(UserWarning, match="maximum principle"):
        sol = solve_stretch(p, np.zeros(33), t_end=0.01, dt=5e-3, m=32)
    assert sol.mesh_flagged


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_energy_stationary_fixed_point(gamma):
    """e_th_ss + r_ss^2/2 is a machine-exact discrete fixed point."""
    tau, Tm, Tp = 1.2, 0.9, 1.4
    p = ChainParams(n=4, gamma=gamma, tau_plus=tau, T_minus=Tm, T_plus=Tp)
    m = 128
    u = grid(m)
    ss = stationary_profiles(p)
    e0 = ss.e_ss(u)
    sol = solve_macro(p, ss.r_ss(u), e0, t_end=0.2, dt=1e-3, m=m)
    assert np.abs(sol.E[-1] - e0).max() < 1e-10


def test_energy_converges_from_zero_data():
    """Zero initial data converges to the closed forms by t=10 (m=256)."""
    p = ChainParams(n=4, gamma=1.0, tau_plus=1.0, T_minus=1.0, T_plus=1.5)
    m = 256
    u = grid(m)
    ss = stationary_profiles(p)
    sol = solve_macro(p, np.zeros(m + 1), np.zeros(m + 1), t_end=10.0,
                      dt=5e-3, m=m)
    assert np.abs(sol.R[-1] - ss.r_ss(u)).max() < 1e-5
    assert np.abs(sol.E[-1] - ss.e_ss(u)).max() < 1e-5


def test_energy_equilibrium_constant():
    p = ChainParams(n=4, gamma=1.7, tau_plus=0.0, T_minus=1.0, T_plus=1.0)
    m = 64
    sol = solve_macro(p, np.zeros(m + 1), np.ones(m + 1), t_end=0.3,
                      dt=2e-3, m=m)
    assert np.abs(sol.E[-1] - 1.0).max() < 1e-12
    assert np.abs(sol.R[-1]).max() < 1e-12


def test_thermal_split_stationary_residual():
    p = ChainParams(n=4, gamma=1.4, tau_plus=1.1, T_minus=0.8, T_plus=1.3)
    m = 128
    u = grid(m)
    ss = stationary_profiles(p)
    sol = solve_macro(p, ss.r_ss(u), ss.e_ss(u), t_end=0.05, dt=1e-3, m=m)
    fields = sol.fields_at(0.05)
    e_mech, e_th, residual = thermal_split(fields)
    assert np.abs(residual).max() < 1e-6
    assert np.abs(e_mech - 0.5 * ss.r_ss(u) ** 2).max() < 1e-9
    assert np.abs(e_th - ss.e_th_ss(u)).max() < 1e-9


def test_thermal_split_mech_decays_without_tension():
    p = ChainParams(n=4, gamma=1.0, tau_plus=0.0, T_minus=1.0, T_plus=1.0)
    m = 64
    u = grid(m)
    r0 = np.sin(np.pi * u)
    sol = solve_macro(p, r0, np.ones(m + 1) + 0.5 * r0 ** 2, t_end=4.0,
                      dt=2e-3, m=m)
    e_mech, _, _ = thermal_split(sol.fields_at(4.0))
    assert np.abs(e_mech).max() < 1e-8


def test_gamma1_midpoint_value():
    """gamma=1, tau=2, T=1: stationary e_th(1/2) = 1.5."""
    p = ChainParams(n=4, gamma=1.0, tau_plus=2.0, T_minus=1.0, T_plus=1.0)
    m = 128
    u = grid(m)
    sol = solve_macro(p, np.zeros(m + 1), np.ones(m + 1), t_end=8.0,
                      dt=4e-3, m=m)
    _, e_th, _ = thermal_split(sol.fields_at(8.0))
    assert e_th[m // 2] == pytest.approx(1.5, abs=1e-6)


# ---------------------------------------------------------------------------
# closed-form stationary profiles
# ---------------------------------------------------------------------------

def test_profiles_boundary_values():
    p = ChainParams(n=4, gamma=1.8, tau_plus=1.7, T_minus=0.6, T_plus=2.2)
    ss = stationary_profiles(p)
    assert ss.e_th_ss(0.0) == pytest.approx(0.6, abs=1e-15)
    assert ss.e_th_ss(1.0) == pytest.approx(2.2, abs=1e-15)
    assert ss.r_ss(1.0) == pytest.approx(1.7)


def test_profiles_current_values():
    # gamma=1, T+=1, T-=2, tau=2: J = -1 (uphill); tau=1: J = +0.5
    p = ChainParams(n=4, gamma=1.0, tau_plus=2.0, T_minus=2.0, T_plus=1.0)
    assert stationary_profiles(p).J_ss == pytest.approx(-1.0)
    p = ChainParams(n=4, gamma=1.0, tau_plus=1.0, T_minus=2.0, T_plus=1.0)
    assert stationary_profiles(p).J_ss == pytest.approx(0.5)
    p = ChainParams(n=4, gamma=2.0, tau_plus=1.0, T_minus=1.0, T_plus=1.5)
    assert stationary_profiles(p).J_ss == pytest.approx(-0.875)


def test_umax_values():
    # symmetric temperatures: peak at 1/2
    p = ChainParams(n=4, gamma=0.7, tau_plus=1.3, T_minus=1.0, T_plus=1.0)
    ss = stationary_profiles(p)
    assert ss.u_max == pytest.approx(0.5)
    assert ss.u_peak == pytest.approx(0.5)
    assert ss.interior
    # reported location formula: 1/2 + (1+g^2) dT / tau^2, clipped at 1
    p = ChainParams(n=4, gamma=1.0, tau_plus=4.0, T_minus=1.0, T_plus=2.0)
    ss = stationary_profiles(p)
    assert ss.u_max == pytest.approx(0.625)
    # the parabola's own argmax carries the extra factor 2
    assert ss.u_peak == pytest.approx(0.5625)
    # weak tension: clipped to the hot endpoint
    p = ChainParams(n=4, gamma=1.0, tau_plus=0.5, T_minus=1.0, T_plus=2.0)
    ss = stationary_profiles(p)
    assert ss.u_max == 1.0 and not ss.interior
    assert ss.e_th_max == 2.0


def test_umax_guard_and_mirror():
    p = ChainParams(n=4, gamma=1.0, tau_plus=0.0, T_minus=1.0, T_plus=2.0)
    assert stationary_profiles(p).u_max == 1.0
    p = ChainParams(n=4, gamma=1.0, tau_plus=0.0, T_minus=2.0, T_plus=1.0)
    assert stationary_profiles(p).u_max == 0.0
    # mirror symmetry of the reported location
    a = stationary_profiles(ChainParams(n=4, gamma=1.0, tau_plus=4.0,
                                        T_minus=1.0, T_plus=2.0))
    b = stationary_profiles(ChainParams(n=4, gamma=1.0, tau_plus=4.0,
                                        T_minus=2.0, T_plus=1.0))
    assert a.u_max == pytest.approx(1.0 - b.u_max)


def test_peak_height_when_interior():
    # gamma=1, tau=2, T=1: e_th_max = 1 + 4/8 = 1.5 at u=1/2
    p = ChainParams(n=4, gamma=1.0, tau_plus=2.0, T_minus=1.0, T_plus=1.0)
    ss = stationary_profiles(p)
    assert ss.e_th_max == pytest.approx(1.5)
    assert ss.e_th_ss(0.5) == pytest.approx(1.5)


def test_interior_maximum_criterion_discrete():
    """Discrete argmax is interior iff the parabola's peak is interior; when
    2(1+g^2)|dT| <= tau^2 (the sufficient condition), the argmax sits within
    one cell of u_peak."""
    m = 256
    u = grid(m)
    for gamma, tau, Tm, Tp in [(1.0, 2.0, 1.0, 1.0), (1.0, 4.0, 1.0, 2.0),
                               (2.0, 3.0, 1.0, 1.3)]:
        p = ChainParams(n=4, gamma=gamma, tau_plus=tau, T_minus=Tm, T_plus=Tp)
        ss = stationary_profiles(p)
        if not ss.interior:
            continue
        eth = ss.e_th_ss(u)
        k = int(np.argmax(eth))
        assert 0 < k < m
        assert abs(u[k] - ss.u_peak) <= 1.0 / m + 1e-12
