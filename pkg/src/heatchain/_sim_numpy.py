"""Pure-numpy stepping kernel (fallback when the C extension is absent).

Both kernels implement the same chunk contract so that, fed the same
pre-drawn normals, they produce numerically identical trajectories:

one step = OU half | exchange sweep (dt/2) | velocity Verlet (dt)
           | reversed exchange sweep (dt/2) | OU half

Normals layout per step (width 2n+4): [xi0, xin | sweep-A thetas (pair k)
| sweep-B thetas (pair k) | xi0, xin].  Thetas are indexed by pair, not by
sweep position, so the consumption order is backend-independent.

Replicas are vectorized along the leading axis.  The even-odd sweep order is
applied as two batched rotations (pairs within one parity class commute);
other orders fall back to a per-pair loop.
"""

from __future__ import annotations

import numpy as np


def _rotate_pairs(p: np.ndarray, theta: np.ndarray, pairs: np.ndarray) -> None:
    """Rotate momentum pairs (k, k+1) by theta[..., k] for k in `pairs` (disjoint)."""
    c = np.cos(theta[:, pairs])
    s = np.sin(theta[:, pairs])
    a = p[:, pairs]
    b = p[:, pairs + 1]
    p[:, pairs] = c * a - s * b
    p[:, pairs + 1] = s * a + c * b


def exchange_sweep(p: np.ndarray, theta: np.ndarray, order: np.ndarray) -> None:
    """Apply one sweep of pair rotations in the given pair order (in place).

    p: (R, n+1) momenta; theta: (R, n) angles indexed by pair; order: (n,)
    permutation of pair indices.
    """
    n = theta.shape[1]
    evens = np.arange(0, n, 2)
    odds = np.arange(1, n, 2)
    # parity-grouped orders batch into two commuting-class rotations
    if np.all(order[:evens.size] % 2 == 0):
        _rotate_pairs(p, theta, evens)
        _rotate_pairs(p, theta, odds)
        return
    if np.all(order[:odds.size] % 2 == 1):
        _rotate_pairs(p, theta, odds)
        _rotate_pairs(p, theta, evens)
        return
    for k in order:
        c = np.cos(theta[:, k])
        s = np.sin(theta[:, k])
        a = p[:, k].copy()
        b = p[:, k + 1]
        p[:, k] = c * a - s * b
        p[:, k + 1] = s * a + c * b


def verlet_step(r: np.ndarray, p: np.ndarray, dt: float, tau: float) -> None:
    """Kick-drift-kick for the undamped linear flow (in place).

    Forces: F_0 = r_1, F_x = r_{x+1} - r_x, F_n = tau - r_n;
    drift: r_x += dt (p_x - p_{x-1}).
    """
    half = 0.5 * dt
    p[:, 0] += half * r[:, 0]
    p[:, 1:-1] += half * (r[:, 1:] - r[:, :-1])
    p[:, -1] += half * (tau - r[:, -1])
    r += dt * (p[:, 1:] - p[:, :-1])
    p[:, 0] += half * r[:, 0]
    p[:, 1:-1] += half * (r[:, 1:] - r[:, :-1])
    p[:, -1] += half * (tau - r[:, -1])


def advance_chunk(z: np.ndarray, normals: np.ndarray, orders: np.ndarray,
                  taus: np.ndarray, dt: float, gamma: float,
                  gamma_tilde: float, T_minus: float, T_plus: float,
                  acc: dict | None = None) -> None:
    """Advance all replicas through one chunk of full steps (in place).

    Args:
        z: (R, 2n+1) states.
        normals: (R, K, 2n+4) pre-drawn standard normals.
        orders: (K, n) int pair order per step (sweep B uses the reverse).
        taus: (K,) tension per step.
        acc: optional accumulator dict with per-replica running sums
            (keys r, p, pp, rr, ppx, prs, prp, j, bnd), updated after every
            full step.
    """
    R, K, width = normals.shape
    n = (z.shape[1] - 1) // 2
    r = z[:, :n]
    p = z[:, n:]
    a_th = np.exp(-0.25 * gamma_tilde * dt)
    s_m = np.sqrt(T_minus * -np.expm1(-0.5 * gamma_tilde * dt))
    s_p = np.sqrt(T_plus * -np.expm1(-0.5 * gamma_tilde * dt))
    th_scale = np.sqrt(0.5 * gamma * dt)
    for k in range(K):
        nk = normals[:, k, :]
        tau = float(taus[k])
        p[:, 0] = a_th * p[:, 0] + s_m * nk[:, 0]
        p[:, -1] = a_th * p[:, -1] + s_p * nk[:, 1]
        exchange_sweep(p, th_scale * nk[:, 2:2 + n], orders[k])
        verlet_step(r, p, dt, tau)
        exchange_sweep(p, th_scale * nk[:, 2 + n:2 + 2 * n], orders[k][::-1])
        p[:, 0] = a_th * p[:, 0] + s_m * nk[:, 2 * n + 2]
        p[:, -1] = a_th * p[:, -1] + s_p * nk[:, 2 * n + 3]
        if acc is not None:
            acc["r"] += r
            acc["p"] += p
            acc["pp"] += p * p
            acc["rr"] += r * r
            acc["ppx"] += p[:, :-1] * p[:, 1:]
            acc["prs"] += p[:, 1:] * r
            acc["prp"] += p[:, :-1] * r
            acc["j"] += (-p[:, :-1] * r
                         + 0.5 * gamma * (p[:, :-1] ** 2 - p[:, 1:] ** 2))
            acc["bnd"][:, 0] += 0.5 * gamma_tilde * (T_minus - p[:, 0] ** 2)
            acc["bnd"][:, 1] += (-0.5 * gamma_tilde * (T_plus - p[:, -1] ** 2)
                                 - tau * p[:, -1])
