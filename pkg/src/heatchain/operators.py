"""Linear-drift / linear-noise operator representation of the chain SDE.

In microscopic time the state z = (r, p) obeys

    dz = (B z + c) ds + sum_k C_k z dw_k + sigma dW,   sigma sigma^T = diag(D)

where B carries the spring forces and all damping, c the boundary tension,
each C_k rotates one neighbouring momentum pair (the exchange noise), and D
is the additive thermostat covariance.  The generator of this SDE acts on a
quadratic polynomial  f(z) = z^T F z + a.z + const  in closed form:

    L f = z^T (F B + B^T F + sum_k C_k^T F C_k) z + (B^T a + 2 F c).z
          + a.c + tr(diag(D) F)

which is what the exact-moment solvers consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .chain import ChainParams, ip, ir, state_dim

__all__ = [
    "OperatorSet",
    "assemble_operators",
    "hamiltonian_part",
    "exchange_channels",
    "exchange_term",
    "apply_generator_quadratic",
]


@dataclass(frozen=True)
class OperatorSet:
    """Drift, forcing and noise operators of the chain in microscopic time.

    Attributes:
        n, gamma, gamma_tilde, T_minus, T_plus: copied model parameters.
        tau_value: tension frozen at the assembly time.
        B: sparse (2n+1)x(2n+1) drift matrix (damping included).
        c: constant drift vector; single nonzero entry tau_value at ip(n).
        exchange_pairs: the n momentum pairs (x, x+1), x = 0..n-1.
        D: diagonal of the additive-noise covariance (vector of length 2n+1).
    """

    n: int
    gamma: float
    gamma_tilde: float
    T_minus: float
    T_plus: float
    tau_value: float
    B: sp.csr_matrix
    c: np.ndarray
    exchange_pairs: tuple
    D: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    def with_tau(self, tau_value: float) -> "OperatorSet":
        """Same operators with the tension entry of c replaced (B is tau-free)."""
        c = self.c.copy()
        c[ip(self.n, self.n)] = tau_value
        return OperatorSet(self.n, self.gamma, self.gamma_tilde, self.T_minus,
                           self.T_plus, float(tau_value), self.B, c,
                           self.exchange_pairs, self.D)


def assemble_operators(params: ChainParams, tau_value: float | None = None) -> OperatorSet:
    """Assemble (B, c, {C_k}, D) for the given parameters.

    Row-level contract of B (microscopic time, n^2 removed):
        dr_x = p_x - p_{x-1}                                    x in 1..n
        dp_x = (r_{x+1} - r_x) - gamma p_x                      x in 1..n-1
        dp_0 = r_1 - (gamma + gamma_tilde)/2 p_0
        dp_n = (tau - r_n) - (gamma + gamma_tilde)/2 p_n
    """
    n = params.n
    if n < 2:
        raise ValueError("n must be >= 2")
    if tau_value is None:
        tau_value = params.tau(0.0)
    g, gt = params.gamma, params.gamma_tilde
    dim = state_dim(n)

    rows, cols, vals = [], [], []

    def put(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    for x in range(1, n + 1):                      # dr_x = p_x - p_{x-1}
        put(ir(x), ip(n, x), 1.0)
        put(ir(x), ip(n, x - 1), -1.0)
    for x in range(1, n):                          # bulk momenta
        put(ip(n, x), ir(x + 1), 1.0)
        put(ip(n, x), ir(x), -1.0)
        put(ip(n, x), ip(n, x), -g)
    put(ip(n, 0), ir(1), 1.0)                      # boundary momenta
    put(ip(n, 0), ip(n, 0), -0.5 * (g + gt))
    put(ip(n, n), ir(n), -1.0)
    put(ip(n, n), ip(n, n), -0.5 * (g + gt))

    B = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))

    c = np.zeros(dim)
    c[ip(n, n)] = tau_value

    D = np.zeros(dim)
    D[ip(n, 0)] = gt * params.T_minus
    D[ip(n, n)] = gt * params.T_plus

    pairs = tuple((x, x + 1) for x in range(n))
    return OperatorSet(n, g, gt, params.T_minus, params.T_plus,
                       float(tau_value), B, c, pairs, D)


def hamiltonian_part(n: int) -> np.ndarray:
    """Skew-symmetric force part of B alone (no damping, no tension).

    Used as the eigen-oracle for the velocity-Verlet substep.
    """
    dim = state_dim(n)
    A = np.zeros((dim, dim))
    for x in range(1, n + 1):
        A[ir(x), ip(n, x)] = 1.0
        A[ir(x), ip(n, x - 1)] = -1.0
    for x in range(1, n):
        A[ip(n, x), ir(x + 1)] = 1.0
        A[ip(n, x), ir(x)] = -1.0
    A[ip(n, 0), ir(1)] = 1.0
    A[ip(n, n), ir(n)] = -1.0
    return A


def exchange_channels(ops: OperatorSet) -> list[sp.csr_matrix]:
    """Materialize the multiplicative-noise matrices C_k.

    For pair (x, x+1): (C_k z)_{ip(x)} = -sqrt(gamma) z_{ip(x+1)} and
    (C_k z)_{ip(x+1)} = +sqrt(gamma) z_{ip(x)}; sqrt(gamma) times a planar
    rotation generator on the momentum pair.
    """
    n, dim = ops.n, ops.dim
    s = np.sqrt(ops.gamma)
    out = []
    for (x, y) in ops.exchange_pairs:
        a, b = ip(n, x), ip(n, y)
        out.append(sp.csr_matrix(([-s, s], ([a, b], [b, a])), shape=(dim, dim)))
    return out


def exchange_term(M: np.ndarray, n: int, gamma: float) -> np.ndarray:
    """sum_k C_k M C_k^T without materializing the C_k.

    Each C_k has support {a,b} x {a,b} with a = ip(x), b = ip(x+1), so the
    result touches only the p-block diagonal and first off-diagonal:
        out[a,a] += gamma M[b,b]   out[b,b] += gamma M[a,a]
        out[a,b] -= gamma M[b,a]   out[b,a] -= gamma M[a,b]
    """
    dim = 2 * n + 1
    out = np.zeros_like(M)
    a = np.arange(n) + n           # ip(x) for x = 0..n-1
    b = a + 1
    d = np.diagonal(M)
    dd = np.zeros(dim)
    np.add.at(dd, a, gamma * d[b])
    np.add.at(dd, b, gamma * d[a])
    out[np.arange(dim), np.arange(dim)] = dd
    out[a, b] = -gamma * M[b, a]
    out[b, a] = -gamma * M[a, b]
    return out


def apply_generator_quadratic(ops: OperatorSet, F: np.ndarray | None = None,
                              a: np.ndarray | None = None,
                              const: float = 0.0):
    """Closure of the generator on f(z) = z^T F z + a.z + const.

    Returns (F2, a2, const2) such that (L f)(z) = z^T F2 z + a2.z + const2,
    with the microscopic-time normalization (the paper-level n^2 removed).
    F must be symmetric when given.
    """
    dim = ops.dim
    B = ops.B
    F2 = np.zeros((dim, dim))
    a2 = np.zeros(dim)
    const2 = 0.0
    if F is not None:
        F = np.asarray(F, dtype=float)
        FB = (B.T.dot(F.T)).T          # F B with sparse B
        F2 = FB + FB.T
        # exchange channels: sum_k C_k^T F C_k has the same local structure
        # as exchange_term applied to F (transpose symmetry of the rotation).
        F2 += exchange_term(F, ops.n, ops.gamma)
        a2 += 2.0 * (F @ ops.c)
        const2 += float(np.dot(ops.D, np.diagonal(F)))
    if a is not None:
        a = np.asarray(a, dtype=float)
        a2 += B.T.dot(a)
        const2 += float(np.dot(a, ops.c))
    return F2, a2, const2
