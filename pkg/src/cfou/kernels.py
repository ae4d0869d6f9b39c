"""Tensor-space norms of the exponential triangular kernels and contractions.

Kernels are projected on step functions of an ``n x n`` midpoint grid and
contracted with the fBm increment Gram matrix ``G`` in both slots:

    ||K||^2 = sum(K * conj(G K G)).

Raw projections converge slowly (the diagonal jump costs ``O(dt^(4H-1))``).
``method="extrapolated"`` subtracts the pure jump kernel ``1_{s<t}`` (whose
norm is known in closed form) on the same grid, then applies Aitken's
delta-squared over ``n, 2n, 4n``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import special

from .errors import DomainError
from .estimator import asymptotic_constants
from .fbm import as_hurst, increment_gram
from .fou import as_drift
from .quad import kappa, triangle_integral


class KernelKind(enum.Enum):
    PSI = "Psi"
    HH = "Hh"


@dataclass(frozen=True)
class ExpKernel:
    """``Psi(t,s) = e^{-conj(gamma)(t-s)} 1_{s<t}``, ``Hh(t,s) = e^{-gamma(s-t)} 1_{t<s}``."""

    kind: KernelKind
    gamma: complex
    t_end: float

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        object.__setattr__(self, "gamma", as_drift(self.gamma).gamma)
        if not self.t_end > 0:
            raise DomainError("t_end must be positive")

    def __call__(self, t, s) -> np.ndarray:
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        inside = (t >= 0) & (s >= 0) & (t <= self.t_end) & (s <= self.t_end)
        if self.kind is KernelKind.PSI:
            D = t - s
            return np.where(inside & (D > 0), np.exp(-np.conj(self.gamma) * np.where(D > 0, D, 0)), 0)
        D = s - t
        return np.where(inside & (D > 0), np.exp(-self.gamma * np.where(D > 0, D, 0)), 0)

    def grid(self, n: int) -> np.ndarray:
        """Midpoint values on ``n x n`` cells (zero on diagonal cells)."""
        dt = self.t_end / n
        m = (np.arange(n) + 0.5) * dt
        return self(m[:, None], m[None, :]).astype(complex)


def gram(h, t_end: float, n: int) -> np.ndarray:
    return increment_gram(h, np.linspace(0.0, t_end, n + 1))


def bilinear(K: np.ndarray, L: np.ndarray, G: np.ndarray) -> complex:
    """``<K, L>`` for step kernels: ``sum(K * conj(G L G))``."""
    return complex(np.sum(K * np.conj(G @ L @ G)))


def jump_norm_coefficient(h) -> float:
    """``c_H`` with ``||1_{0<=s<t<=T}||^2 = c_H T^(4H)`` for ``H in (1/4, 1/2)``."""
    H = as_hurst(h).h
    if not 0.25 < H < 0.5:
        raise DomainError("jump-kernel norm is finite only for H in (1/4, 1/2)")
    return H**2 * ((1 / (2 * H)) ** 2 + 1 / (2 * H * (4 * H - 1)) + (1 / H) * (special.beta(2 * H, 2 * H + 1) - 1 / (4 * H)))


def aitken(a: complex, b: complex, c: complex) -> complex:
    """Aitken delta-squared limit; falls back to ``c`` when not contracting."""

    def one(x, y, z):
        d1, d2 = y - x, z - y
        if d1 == 0 or d2 == 0:
            return z
        r = d2 / d1
        if not (-1 < r < 1):
            return z
        return z + d2 * r / (1 - r)

    a, b, c = complex(a), complex(b), complex(c)
    return complex(one(a.real, b.real, c.real), one(a.imag, b.imag, c.imag))


def _raw_pair(psi: ExpKernel, other: ExpKernel | None, h, n: int) -> tuple[complex, complex, np.ndarray]:
    G = gram(h, psi.t_end, n)
    K = psi.grid(n)
    L = K if other is None else other.grid(n)
    return bilinear(K, L, G), G, K


def _lower(n: int) -> np.ndarray:
    return np.tril(np.ones((n, n)), -1)


def _cv_value(psi: ExpKernel, other: ExpKernel | None, h, n: int) -> complex:
    H = as_hurst(h).h
    T = psi.t_end
    G = gram(H, T, n)
    K = psi.grid(n)
    low = _lower(n)
    if other is None:
        # control variate on the same grid: chi = 1_{s<t} (or 1_{t<s})
        X = low if psi.kind is KernelKind.PSI else low.T
        exact = jump_norm_coefficient(H) * T ** (4 * H)
        return bilinear(K, K, G) - bilinear(X, X, G) + exact
    L = other.grid(n)
    XK = low if psi.kind is KernelKind.PSI else low.T
    XL = low if other.kind is KernelKind.PSI else low.T
    if psi.kind is other.kind:
        exact = jump_norm_coefficient(H) * T ** (4 * H)
    else:
        exact = T ** (4 * H) / 2 - jump_norm_coefficient(H) * T ** (4 * H)
    return bilinear(K, L, G) - bilinear(XK, XL, G) + exact


def tensor_norm_sq(k, h, n: int, *, method: str = "auto") -> float:
    """``||k||^2`` in the tensor-square space.

    Args:
        k: an ``ExpKernel`` or a callable ``k(t, s)`` on ``[0, T]^2`` given
            together with ``T`` as a tuple ``(callable, T)``.
        h: Hurst exponent.
        n: grid cells per axis (base grid for ``"extrapolated"``).
        method: ``"step"`` (plain projection), ``"extrapolated"`` (control
            variate plus Aitken over ``n, 2n, 4n``; exponential kernels with
            ``H in (1/4, 1/2)`` only) or ``"auto"`` (extrapolated when
            available, else step).
    """
    if n < 8:
        raise DomainError("n must be at least 8")
    H = as_hurst(h).h
    method = _method(k, H, method)
    if isinstance(k, ExpKernel):
        if method == "step":
            v, _, _ = _raw_pair(k, None, H, n)
        else:
            v = aitken(*[_cv_value(k, None, H, n * 2**j) for j in range(3)])
        return float(v.real)
    fn, T = k
    dt = T / n
    m = (np.arange(n) + 0.5) * dt
    K = np.asarray(fn(m[:, None], m[None, :]), dtype=complex)
    return float(bilinear(K, K, gram(H, T, n)).real)


def _method(k, H: float, method: str) -> str:
    if method not in ("auto", "step", "extrapolated"):
        raise DomainError(f"unknown method {method!r}")
    ok = isinstance(k, ExpKernel) and 0.25 < H < 0.5
    if method == "auto":
        return "extrapolated" if ok else "step"
    if method == "extrapolated" and not ok:
        raise DomainError("extrapolation needs an exponential kernel and H in (1/4, 1/2)")
    return method


def tensor_inner(psi: ExpKernel, hh: ExpKernel, h, n: int, *, method: str = "auto") -> complex:
    """``<psi, hh>`` in the tensor-square space (complex)."""
    if psi.t_end != hh.t_end:
        raise DomainError("kernels must share t_end")
    H = as_hurst(h).h
    method = _method(psi, H, method)
    if method == "step":
        v, _, _ = _raw_pair(psi, hh, H, n)
        return v
    return aitken(*[_cv_value(psi, hh, H, n * 2**j) for j in range(3)])


# --------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class ConvergenceRow:
    t_end: float
    n: int
    estimate: complex
    target: float | complex
    residual: complex


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow] = field(default_factory=list)

    def __post_init__(self):
        self.rows.sort(key=lambda r: (r.t_end, r.n))

    def growth_ratio(self) -> float:
        return float(abs(self.rows[-1].estimate) / abs(self.rows[0].estimate))

    def csv_rows(self) -> list[tuple]:
        out = []
        for r in self.rows:
            tgt = r.target if np.isrealobj(r.target) else complex(r.target)
            tgt_s = complex(tgt)
            out.append(
                (
                    r.t_end,
                    r.n,
                    r.estimate.real,
                    r.estimate.imag,
                    tgt_s.real if tgt_s.imag == 0 else f"{tgt_s.real}{tgt_s.imag:+}j",
                    abs(r.residual) if np.isfinite(abs(r.residual)) else float("nan"),
                )
            )
        return out


CSV_COLUMNS = ("T", "n", "estimate_re", "estimate_im", "target", "residual")


def linear_coefficients(gamma, h) -> tuple[float, complex]:
    """``(H Gamma(2H))^2 M_H^2`` and ``(H Gamma(2H))^2 N_H``."""
    H = as_hurst(h).h
    cs = asymptotic_constants(gamma, H)
    pref = (H * special.gamma(2 * H)) ** 2
    return pref * cs.m_h2, pref * cs.n_h


def divergence_probe(h, gamma, t_end: float, n_list: Sequence[int]) -> ConvergenceTable:
    """Plain step-projection norms of ``psi`` across grid refinements.

    Growth with ``n`` signals that ``psi`` is outside the tensor space. The
    target column holds the linear-drift prediction when it exists.
    """
    H = as_hurst(h).h
    k = ExpKernel(KernelKind.PSI, gamma, t_end)
    try:
        target = linear_coefficients(gamma, H)[0] * t_end
    except DomainError:
        target = float("nan")
    rows = []
    for n in n_list:
        v = complex(tensor_norm_sq(k, H, n, method="step"))
        rows.append(ConvergenceRow(float(t_end), int(n), v, target, v - target))
    return ConvergenceTable(rows)


def drift_sweep(
    gamma,
    h,
    t_list: Iterable[float],
    density: float,
    *,
    quantity: str = "norm",
    method: str = "auto",
) -> ConvergenceTable:
    """``||psi_T||^2`` (or ``<psi_T, h_T>``) over horizons at ``n = density * T``."""
    H = as_hurst(h).h
    a, b = linear_coefficients(gamma, H)
    rows = []
    for T in sorted(float(t) for t in t_list):
        n = max(8, int(round(density * T)))
        psi = ExpKernel(KernelKind.PSI, gamma, T)
        if quantity == "norm":
            v = complex(tensor_norm_sq(psi, H, n, method=method))
            tgt = a * T
        elif quantity == "inner":
            v = tensor_inner(psi, ExpKernel(KernelKind.HH, gamma, T), H, n, method=method)
            tgt = b * T
        else:
            raise DomainError(f"unknown quantity {quantity!r}")
        rows.append(ConvergenceRow(T, n, v, tgt, v - tgt))
    return ConvergenceTable(rows)


def slope(table: ConvergenceTable) -> complex:
    """Least-squares slope of the estimates against ``T``."""
    T = np.array([r.t_end for r in table.rows])
    v = np.array([r.estimate for r in table.rows])
    return complex(np.polyfit(T, v.real, 1)[0], np.polyfit(T, v.imag, 1)[0])


# --------------------------------------------------------------------------
# contractions


def contract(K: np.ndarray, G: np.ndarray) -> np.ndarray:
    """``phi(s, t) = <K(., t), K(s, .)>`` on the grid: ``conj(K) G K``."""
    return np.conj(K) @ G @ K


def contraction_norm(gamma, h, t_end: float, n: int) -> float:
    """``||phi||_{tensor} / T`` for ``phi = psi_T contracted with itself``.

    Cost is ``O(n^3)`` through two matrix products per contraction.
    """
    H = as_hurst(h).h
    if not 1 / 6 < H < 0.5:
        raise DomainError("contraction decay holds for H in (1/6, 1/2)")
    G = gram(H, t_end, n)
    K = ExpKernel(KernelKind.PSI, gamma, t_end).grid(n)
    phi = contract(K, G)
    return float(math.sqrt(max(bilinear(phi, phi, G).real, 0.0)) / t_end)


# --------------------------------------------------------------------------
# three-term split of ||psi_T||^2


def three_term_split(gamma, h, t_end: float) -> dict[str, float]:
    """``H^2 (A1 + A2 + A3)`` with the bounded remainders dropped.

    ``A1`` uses its closed-form expansion; ``A2`` and ``A3`` keep their
    triangle integrals ``W(2H-1, 2H-1)`` (with and without the ``T - y``
    weight), evaluated by quadrature.
    """
    g = as_drift(gamma)
    H = as_hurst(h).h
    if not 0.25 < H < 0.5:
        raise DomainError("the split holds for H in (1/4, 1/2)")
    T = float(t_end)
    gm, lam = g.gamma, g.lam
    b = 2 * H - 1
    G2 = special.gamma(2 * H) ** 2
    k = kappa(H)
    a1 = (
        T ** (4 * H) / (2 * H * (4 * H - 1))
        - T * abs(gm) ** 2 / lam * (G2 - 2 * k) * (gm ** (-4 * H)).real
        - 2 * lam / ((4 * H - 1) * abs(gm) ** 2) * T ** (4 * H - 1)
    )
    W = triangle_integral(b, b, gm, T)
    Wt = triangle_integral(b, b, gm, T, weight=lambda y: T - y)
    a2 = 2 * (W - 2 * gm * Wt + G2 * gm ** (1 - 4 * H) * T).real
    a3 = T ** (4 * H) / (2 * H * (4 * H - 1)) - 2 * W.real
    return {"A1": float(a1), "A2": float(a2), "A3": float(a3), "total": float(H**2 * (a1 + a2 + a3))}
