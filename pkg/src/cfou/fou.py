"""Complex fractional Ornstein-Uhlenbeck process ``dZ = -gamma Z dt + d zeta``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import signal, special

from .errors import DomainError
from .fbm import ComplexPath, Seed, UniformGrid, as_hurst, sample_complex_fgn


@dataclass(frozen=True)
class DriftParam:
    """``gamma = lambda - i omega`` with ``lambda > 0``."""

    lam: float
    omega: float = 0.0

    def __post_init__(self):
        if not (float(self.lam) > 0) or not np.isfinite(self.lam):
            raise DomainError(f"lambda must be positive, got {self.lam!r}")
        if not np.isfinite(self.omega):
            raise DomainError("omega must be finite")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "omega", float(self.omega))

    @classmethod
    def from_complex(cls, gamma: complex) -> "DriftParam":
        g = complex(gamma)
        return cls(g.real, -g.imag)

    @property
    def gamma(self) -> complex:
        return complex(self.lam, -self.omega)

    @property
    def gamma_bar(self) -> complex:
        return complex(self.lam, self.omega)

    def __complex__(self) -> complex:
        return self.gamma


def as_drift(gamma) -> DriftParam:
    return gamma if isinstance(gamma, DriftParam) else DriftParam.from_complex(gamma)


def fou_from_increments(gamma, dt: float, dzeta: np.ndarray) -> np.ndarray:
    """Left-point exponential-Euler paths from driver increments.

    ``Z_0 = 0`` and ``Z_{k+1} = exp(-gamma dt) (Z_k + dzeta_k)``, applied along
    the last axis.
    """
    e = np.exp(-as_drift(gamma).gamma * dt)
    dz = np.asarray(dzeta)
    out = np.zeros(dz.shape[:-1] + (dz.shape[-1] + 1,), dtype=complex)
    out[..., 1:] = signal.lfilter([e], [1.0, -e], dz, axis=-1)
    return out


def simulate_fou(gamma, h, grid: UniformGrid, seed: Seed) -> ComplexPath:
    """One path of the complex fOU process started at zero.

    The driver is ``sample_complex_fbm(h, grid, seed)``; its increments are
    kept on the returned path.
    """
    dz = sample_complex_fgn(h, grid, seed.base, [seed.stream])[0]
    return ComplexPath(grid, fou_from_increments(gamma, grid.dt, dz), dz)


def simulate_fou_batch(gamma, h, grid: UniformGrid, base: int, reps: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
    """Paths for several replications; returns ``(Z, dzeta)`` stacked by row."""
    dz = sample_complex_fgn(h, grid, base, reps)
    return fou_from_increments(gamma, grid.dt, dz), dz


def ergodic_average(z: ComplexPath | np.ndarray, t_end: float | None = None) -> float | np.ndarray:
    """Trapezoidal ``(1/T) int_0^T |Z_t|^2 dt`` (rows of an array are paths)."""
    if isinstance(z, ComplexPath):
        vals, T = z.values, z.grid.t_end
    else:
        if t_end is None:
            raise DomainError("t_end is required for raw arrays")
        vals, T = np.asarray(z), float(t_end)
    a2 = np.abs(vals) ** 2
    n = a2.shape[-1] - 1
    dt = T / n
    integral = dt * (a2[..., 1:-1].sum(axis=-1) + 0.5 * (a2[..., 0] + a2[..., -1]))
    out = integral / T
    return float(out) if np.ndim(out) == 0 else out


def stationary_variance(gamma, h) -> float:
    """``H Gamma(2H) (1/2 lambda) (gamma_bar^(1-2H) + gamma^(1-2H))``."""
    g = as_drift(gamma)
    H = as_hurst(h).h
    d = (g.gamma ** (1 - 2 * H) + g.gamma_bar ** (1 - 2 * H)) / (2 * g.lam)
    return float(H * special.gamma(2 * H) * d.real)
