"""Exact synthesis of real and complex fractional Brownian motion.

Paths are produced by circulant embedding of the fractional Gaussian noise
autocovariance (Davies-Harte), with a dense Cholesky fallback.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

from .errors import DomainError, SynthesisError

EIGEN_TOL = 1e-12


class Regime(enum.Enum):
    LOW = "low"  # (0, 1/4]
    MID = "mid"  # (1/4, 1/2)
    HALF = "half"  # {1/2}
    HIGH = "high"  # (1/2, 1)


@dataclass(frozen=True)
class HurstParam:
    """Hurst exponent ``h`` in (0, 1)."""

    h: float

    def __post_init__(self):
        h = float(self.h)
        if not (0.0 < h < 1.0) or not np.isfinite(h):
            raise DomainError(f"hurst parameter must lie in (0,1), got {self.h!r}")
        object.__setattr__(self, "h", h)

    @property
    def regime(self) -> Regime:
        if self.h <= 0.25:
            return Regime.LOW
        if self.h < 0.5:
            return Regime.MID
        if self.h == 0.5:
            return Regime.HALF
        return Regime.HIGH

    def __float__(self) -> float:
        return self.h


def as_hurst(h) -> HurstParam:
    return h if isinstance(h, HurstParam) else HurstParam(float(h))


@dataclass(frozen=True)
class UniformGrid:
    """Uniform grid ``t_k = k * dt`` on ``[0, t_end]`` with ``n`` steps."""

    t_end: float
    n: int

    def __post_init__(self):
        if not (float(self.t_end) > 0.0) or not np.isfinite(self.t_end):
            raise DomainError(f"t_end must be positive, got {self.t_end!r}")
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n!r}")
        object.__setattr__(self, "t_end", float(self.t_end))
        object.__setattr__(self, "n", int(self.n))

    @property
    def dt(self) -> float:
        return self.t_end / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.dt


@dataclass(frozen=True)
class RealPath:
    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.n + 1,):
            raise DomainError("path length must equal n + 1")


@dataclass(frozen=True)
class ComplexPath:
    grid: UniformGrid
    values: np.ndarray
    # driver increments used to build the path, when known
    increments: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.values.shape != (self.grid.n + 1,):
            raise DomainError("path length must equal n + 1")


_U64 = 2**64


@dataclass(frozen=True)
class Seed:
    """Deterministic random source identified by ``(base, stream)``.

    Distinct pairs map to distinct, statistically independent Philox streams
    through ``numpy.random.SeedSequence`` spawn keys.
    """

    base: int
    stream: int = 0

    def __post_init__(self):
        for name in ("base", "stream"):
            v = getattr(self, name)
            if int(v) != v or not (0 <= int(v) < _U64):
                raise DomainError(f"seed {name} must be a 64-bit unsigned integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.base, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, stream: int) -> "Seed":
        return Seed(self.base, stream)


# --------------------------------------------------------------------------
# covariance


def fbm_covariance(s, t, h) -> float | np.ndarray:
    """``R(s,t) = (s^{2H} + t^{2H} - |s-t|^{2H}) / 2``.

    Accepts scalars or broadcastable arrays.
    """
    H = as_hurst(h).h
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if np.any(s_arr < 0) or np.any(t_arr < 0):
        raise DomainError("fbm_covariance requires non-negative times")
    out = 0.5 * (s_arr ** (2 * H) + t_arr ** (2 * H) - np.abs(s_arr - t_arr) ** (2 * H))
    return float(out) if out.ndim == 0 else out


def fgn_autocovariance(h, n: int, dt: float = 1.0) -> np.ndarray:
    """Autocovariance ``r(0..n)`` of increments on a grid of step ``dt``."""
    H = as_hurst(h).h
    k = np.arange(n + 1, dtype=float)
    r = 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))
    return r * dt ** (2 * H)


def increment_covariance(h, grid: UniformGrid) -> np.ndarray:
    """Dense ``n x n`` covariance of the grid increments (Toeplitz)."""
    return linalg.toeplitz(fgn_autocovariance(h, grid.n - 1, grid.dt))


def increment_gram(h, edges: np.ndarray) -> np.ndarray:
    """Increment covariance for arbitrary cell edges ``0 <= e_0 < ... < e_n``."""
    e = np.asarray(edges, dtype=float)
    R = fbm_covariance(e[:, None], e[None, :], h)
    return R[1:, 1:] - R[1:, :-1] - R[:-1, 1:] + R[:-1, :-1]


# --------------------------------------------------------------------------
# synthesis


@dataclass(frozen=True)
class _Embedding:
    sqrt_eig: np.ndarray | None  # circulant route
    chol: np.ndarray | None  # dense route


def _embedding(h, grid: UniformGrid, eigen_tol: float, allow_fallback: bool, method: str) -> _Embedding:
    if method not in ("circulant", "cholesky"):
        raise DomainError(f"unknown synthesis method {method!r}")
    if method == "circulant":
        r = fgn_autocovariance(h, grid.n, grid.dt)
        c = np.concatenate([r, r[-2:0:-1]])
        eig = np.fft.fft(c).real
        lo = eig.min()
        if lo >= -eigen_tol * max(1.0, eig.max()):
            return _Embedding(np.sqrt(np.clip(eig, 0.0, None) / eig.size), None)
        if not allow_fallback:
            raise SynthesisError(f"circulant embedding has eigenvalue {lo:.3e} below tolerance")
    cov = increment_covariance(h, grid)
    shift = 0.0
    for _ in range(6):
        try:
            return _Embedding(None, linalg.cholesky(cov + shift * np.eye(grid.n), lower=True))
        except linalg.LinAlgError:
            shift = 1e-14 if shift == 0.0 else shift * 10
    raise SynthesisError("dense factorization of the increment covariance failed")


def _draw_increments(emb: _Embedding, n: int, rng: np.random.Generator) -> np.ndarray:
    if emb.sqrt_eig is not None:
        m = emb.sqrt_eig.size
        z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        return np.fft.fft(emb.sqrt_eig * z)[:n].real
    return emb.chol @ rng.standard_normal(n)


def sample_fgn(
    h,
    grid: UniformGrid,
    seeds: Seed | Sequence[Seed],
    *,
    eigen_tol: float = EIGEN_TOL,
    allow_fallback: bool = True,
    method: str = "circulant",
) -> np.ndarray:
    """Increments ``B(t_{k+1}) - B(t_k)``; one row per seed when given a sequence."""
    single = isinstance(seeds, Seed)
    seq = [seeds] if single else list(seeds)
    emb = _embedding(h, grid, eigen_tol, allow_fallback, method)
    out = np.empty((len(seq), grid.n))
    for i, sd in enumerate(seq):
        out[i] = _draw_increments(emb, grid.n, sd.generator())
    return out[0] if single else out


def _cumulate(incr: np.ndarray) -> np.ndarray:
    shape = incr.shape[:-1] + (incr.shape[-1] + 1,)
    out = np.zeros(shape, dtype=incr.dtype)
    np.cumsum(incr, axis=-1, out=out[..., 1:])
    return out


def sample_fbm_path(
    h,
    grid: UniformGrid,
    seed: Seed,
    *,
    eigen_tol: float = EIGEN_TOL,
    allow_fallback: bool = True,
    method: str = "circulant",
) -> RealPath:
    """One exact sample of fBm on ``grid`` (``values[0] == 0``).

    Args:
        h: Hurst exponent.
        grid: time grid.
        seed: random source; identical seeds give identical paths.
        eigen_tol: negative circulant eigenvalues above ``-eigen_tol`` (relative
            to the largest) are clipped; below it the dense route is used.
        allow_fallback: if False, a bad embedding raises ``SynthesisError``.
        method: ``"circulant"`` or ``"cholesky"``.
    """
    incr = sample_fgn(h, grid, seed, eigen_tol=eigen_tol, allow_fallback=allow_fallback, method=method)
    return RealPath(grid, _cumulate(incr))


def complex_streams(rep: int) -> tuple[int, int]:
    """Streams of the two real components for replication ``rep``."""
    return 2 * rep, 2 * rep + 1


def sample_complex_fgn(h, grid: UniformGrid, base: int, reps: Iterable[int], **kw) -> np.ndarray:
    """Complex increments ``(dB1 + i dB2)/sqrt(2)``, shape ``(len(reps), n)``."""
    reps = list(reps)
    seeds = []
    for rep in reps:
        a, b = complex_streams(rep)
        seeds += [Seed(base, a), Seed(base, b)]
    real = sample_fgn(h, grid, seeds, **kw).reshape(len(reps), 2, grid.n)
    return (real[:, 0] + 1j * real[:, 1]) / np.sqrt(2.0)


def sample_complex_fbm(h, grid: UniformGrid, seed: Seed, **kw) -> ComplexPath:
    """``zeta = (B1 + i B2)/sqrt(2)`` with ``B1, B2`` on streams ``2s`` and ``2s+1``.

    ``seed.stream`` plays the role of the replication index.
    """
    incr = sample_complex_fgn(h, grid, seed.base, [seed.stream], **kw)[0]
    return ComplexPath(grid, _cumulate(incr), incr)
