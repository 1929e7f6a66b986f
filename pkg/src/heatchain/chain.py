"""Model definition for the open harmonic chain with momentum-exchange noise.

A chain of n springs carries stretches r_1..r_n and momenta p_0..p_n.  The
bulk evolves Hamiltonian dynamics perturbed by a pairwise random exchange of
neighbouring momenta (kinetic energy conserving), Ornstein-Uhlenbeck
thermostats act on p_0 and p_n at temperatures T_minus / T_plus, and a
constant (or slowly varying) tension tau_plus forces the right end.

State layout, shared by every module: z = (r_1..r_n, p_0..p_n), so
``len(z) == 2n + 1`` with index maps ``ir(x) = x - 1`` for x in 1..n and
``ip(x) = n + x`` for x in 0..n.

All quantities here use microscopic time; the diffusive-scaling factor n^2
enters only in time-evolution routines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChainParams",
    "ConstantTension",
    "RampTension",
    "SinusoidTension",
    "parse_tension",
    "ir",
    "ip",
    "state_dim",
    "validate_state",
    "site_energy",
    "total_energy",
    "bulk_current",
    "boundary_currents",
]


# ---------------------------------------------------------------------------
# tension schedules (constant, linear ramp, sinusoid)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantTension:
    value: float

    def __call__(self, t: float) -> float:
        return self.value


@dataclass(frozen=True)
class RampTension:
    """Linear ramp from ``start`` to ``end`` over [0, t_ramp] (macroscopic time)."""

    start: float
    end: float
    t_ramp: float

    def __call__(self, t: float) -> float:
        if self.t_ramp <= 0.0:
            return self.end if t >= 0.0 else self.start
        s = min(max(t / self.t_ramp, 0.0), 1.0)
        return self.start + (self.end - self.start) * s


@dataclass(frozen=True)
class SinusoidTension:
    """tau(t) = base + amplitude * sin(2 pi t / period + phase)."""

    base: float
    amplitude: float
    period: float
    phase: float = 0.0

    def __call__(self, t: float) -> float:
        return self.base + self.amplitude * np.sin(2.0 * np.pi * t / self.period + self.phase)


def parse_tension(spec):
    """Build a tension schedule from a float or a compact string.

    Accepted strings: a plain number, ``ramp:start:end:t_ramp`` or
    ``sinusoid:base:amplitude:period[:phase]``.
    """
    if callable(spec):
        return spec
    if isinstance(spec, (int, float)):
        return ConstantTension(float(spec))
    parts = str(spec).split(":")
    if len(parts) == 1:
        return ConstantTension(float(parts[0]))
    kind = parts[0].strip().lower()
    args = [float(p) for p in parts[1:]]
    if kind == "ramp" and len(args) == 3:
        return RampTension(*args)
    if kind == "sinusoid" and len(args) in (3, 4):
        return SinusoidTension(*args)
    raise ValueError(
        f"cannot parse tension schedule {spec!r}; expected a number, "
        "'ramp:start:end:t_ramp' or 'sinusoid:base:amp:period[:phase]'"
    )


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainParams:
    """Physical parameters of the chain.

    Attributes:
        n: number of springs; sites are r-index 1..n and p-index 0..n.
        gamma: exchange-noise intensity (> 0).
        gamma_tilde: thermostat intensity (> 0).
        tau_plus: boundary tension; a constant or a schedule of macroscopic time.
        T_minus: left thermostat temperature (>= 0).
        T_plus: right thermostat temperature (>= 0).
    """

    n: int
    gamma: float = 1.0
    gamma_tilde: float = 1.0
    tau_plus: object = 0.0
    T_minus: float = 1.0
    T_plus: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.gamma_tilde <= 0:
            raise ValueError("gamma_tilde must be positive")
        if self.T_minus < 0:
            raise ValueError("T_minus must be nonnegative")
        if self.T_plus < 0:
            raise ValueError("T_plus must be nonnegative")
        object.__setattr__(self, "tau_plus", parse_tension(self.tau_plus))

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    def tau(self, t: float = 0.0) -> float:
        """Tension at macroscopic time t."""
        return float(self.tau_plus(t))

    @property
    def tau_is_constant(self) -> bool:
        return isinstance(self.tau_plus, ConstantTension)


# ---------------------------------------------------------------------------
# state layout
# ---------------------------------------------------------------------------

def ir(x: int) -> int:
    """Index of stretch r_x (x in 1..n) inside the state vector."""
    return x - 1


def ip(n: int, x: int) -> int:
    """Index of momentum p_x (x in 0..n) inside the state vector."""
    return n + x


def state_dim(n: int) -> int:
    return 2 * n + 1


def validate_state(z: np.ndarray, n: int) -> np.ndarray:
    """Check layout and finiteness of a state vector; returns it as float array."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != state_dim(n):
        raise ValueError(f"state must have length {state_dim(n)}, got {z.shape[-1]}")
    if not np.all(np.isfinite(z)):
        raise ValueError("state contains non-finite entries")
    return z


# ---------------------------------------------------------------------------
# pointwise observables
# ---------------------------------------------------------------------------

def site_energy(z: np.ndarray, x: int, n: int) -> float:
    """Energy of site x: p_x^2/2 + r_x^2/2 for x >= 1, p_0^2/2 for x = 0."""
    if not 0 <= x <= n:
        raise ValueError(f"site index {x} out of range 0..{n}")
    e = 0.5 * z[ip(n, x)] ** 2
    if x >= 1:
        e += 0.5 * z[ir(x)] ** 2
    return float(e)


def total_energy(z: np.ndarray, n: int) -> float:
    """Total energy; equals ||z||^2 / 2 by the quadratic form identity."""
    return 0.5 * float(np.dot(z, z))


def bulk_current(z: np.ndarray, x: int, n: int, gamma: float) -> float:
    """Instantaneous energy current across bond (x, x+1) for x in 0..n-1.

    j_{x,x+1} = -p_x r_{x+1} + (gamma/2) (p_x^2 - p_{x+1}^2).
    """
    if not 0 <= x <= n - 1:
        raise ValueError(f"bond index {x} out of range 0..{n - 1}")
    px = z[ip(n, x)]
    px1 = z[ip(n, x + 1)]
    return float(-px * z[ir(x + 1)] + 0.5 * gamma * (px * px - px1 * px1))


def boundary_currents(z: np.ndarray, n: int, gamma_tilde: float,
                      T_minus: float, T_plus: float,
                      tau_value: float) -> tuple[float, float]:
    """Instantaneous currents through the two thermostats.

    Returns (j_{-1,0}, j_{n,n+1}) with
    j_{-1,0}  = (gamma_tilde/2) (T_minus - p_0^2)
    j_{n,n+1} = -(gamma_tilde/2) (T_plus - p_n^2) - tau * p_n.
    """
    p0 = z[ip(n, 0)]
    pn = z[ip(n, n)]
    j_left = 0.5 * gamma_tilde * (T_minus - p0 * p0)
    j_right = -0.5 * gamma_tilde * (T_plus - pn * pn) - tau_value * pn
    return float(j_left), float(j_right)
