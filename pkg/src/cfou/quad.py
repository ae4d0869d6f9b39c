"""Singular-integral quadrature and large-T asymptotic expansions.

Two engines live here:

* ``integrate_singular_1d``: globally adaptive bisection with Gauss-Jacobi
  panels at singular endpoints and Gauss-Legendre panels elsewhere.
* ``graded_rule``: a fixed composite rule on ``[0, 1]`` (Jacobi panel at a
  singular end, geometric grading toward both ends, uniform panels in the
  middle) for vectorized evaluation of many integrals at once.

The triangle integrals ``W(a, b, gamma, T)`` over ``0 <= x <= z <= T`` are
built from those rules and feed the expansion checks ``asym_key0``,
``asym_key`` and ``asym_coro``.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

from .errors import AccuracyError, DomainError
from .fbm import as_hurst

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-12
MAX_LEVEL = 20


# --------------------------------------------------------------------------
# Gauss rules on [0, 1]


@lru_cache(maxsize=256)
def gauss_jacobi01(n: int, p: float = 0.0, q: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for ``int_0^1 g(u) u^p (1-u)^q du``."""
    if p == 0.0 and q == 0.0:
        x, w = np.polynomial.legendre.leggauss(n)
    else:
        # scipy weight is (1-x)^alpha (1+x)^beta on [-1, 1]
        x, w = special.roots_jacobi(n, q, p)
    u = 0.5 * (x + 1.0)
    w = w / 2.0 ** (p + q + 1.0)
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


@dataclass(frozen=True)
class SingularWeight:
    """Weight ``(x-a)^p (b-x)^q`` on ``[a, b]`` with ``p, q > -1``."""

    exponent_left: float
    exponent_right: float
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.exponent_left > -1 and self.exponent_right > -1):
            raise DomainError("singular exponents must exceed -1")
        if not (self.b > self.a):
            raise DomainError("interval must satisfy a < b")


@dataclass(frozen=True)
class QuadResult:
    value: complex | float
    error: float
    n_eval: int


def _as_vector_fn(f: Callable) -> Callable[[np.ndarray], np.ndarray]:
    def g(x: np.ndarray) -> np.ndarray:
        try:
            y = np.asarray(f(x))
            if y.shape == x.shape:
                return y
        except (TypeError, ValueError):
            pass
        return np.array([f(float(v)) for v in x])

    return g


def integrate_singular_1d(
    f: Callable,
    w: SingularWeight,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    *,
    max_level: int = MAX_LEVEL,
    order: int = 16,
    full_output: bool = False,
):
    """``int_a^b f(x) (x-a)^p (b-x)^q dx`` by adaptive Gauss-Jacobi bisection.

    Panels touching a singular endpoint carry the Jacobi weight; interior
    panels use Gauss-Legendre on the full integrand. A panel's error is the
    difference between its own rule and the sum over its two halves; the
    panel with the largest error is split until the total meets
    ``rtol * |value| + atol``.

    Raises:
        AccuracyError: tolerance not met within ``max_level`` bisections.
    """
    g = _as_vector_fn(f)
    a, b, p, q = w.a, w.b, w.exponent_left, w.exponent_right
    n_eval = 0

    def rule(c: float, d: float):
        nonlocal n_eval
        pl = p if c == a else 0.0
        qr = q if d == b else 0.0
        u, wt = gauss_jacobi01(order, pl, qr)
        x = c + (d - c) * u
        vals = g(x)
        n_eval += x.size
        fac = np.ones_like(x)
        if pl == 0.0 and p != 0.0:
            fac = fac * (x - a) ** p
        if qr == 0.0 and q != 0.0:
            fac = fac * (b - x) ** q
        return (d - c) ** (1.0 + pl + qr) * np.sum(wt * fac * vals)

    def split(c: float, d: float, coarse, level: int):
        m = 0.5 * (c + d)
        left, right = rule(c, m), rule(m, d)
        fine = left + right
        return (-abs(fine - coarse), c, d, level, fine, (left, right))

    heap = []
    root = rule(a, b)
    item = split(a, b, root, 0)
    heap.append(item)
    total = item[4]
    err = -item[0]
    while True:
        if err <= max(rtol * abs(total), atol):
            break
        neg_e, c, d, level, fine, (left, right) = heapq.heappop(heap)
        if level >= max_level:
            heapq.heappush(heap, (neg_e, c, d, level, fine, (left, right)))
            res = QuadResult(total, float(err), n_eval)
            raise AccuracyError(
                f"integrate_singular_1d did not converge (error {err:.3e})", estimate=res.value, error_bound=res.error
            )
        m = 0.5 * (c + d)
        a1 = split(c, m, left, level + 1)
        a2 = split(m, d, right, level + 1)
        total = total - fine + a1[4] + a2[4]
        err = err + neg_e - a1[0] - a2[0]
        heapq.heappush(heap, a1)
        heapq.heappush(heap, a2)
        # guard against drift in the running sums
        if len(heap) % 64 == 0:
            total = sum(it[4] for it in heap)
            err = sum(-it[0] for it in heap)
    total = sum(it[4] for it in heap)
    if np.isrealobj(total) or np.imag(total) == 0:
        total = float(np.real(total)) if not np.iscomplexobj(total) else total
    if full_output:
        return QuadResult(total, float(err), n_eval)
    return total


# --------------------------------------------------------------------------
# graded composite rules


@lru_cache(maxsize=512)
def graded_rule(
    length: float = 1.0,
    *,
    left_exp: float = 0.0,
    right_exp: float = 0.0,
    grade_left: bool = True,
    grade_right: bool = True,
    hmax: float | None = None,
    order: int = 12,
    ratio: float = 0.25,
    smallest: float = 1e-15,
    refine: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule for ``int_0^1 g(u) u^left_exp (1-u)^right_exp du``.

    ``g`` may be nearly singular at either end (grading resolves features
    down to ``smallest``) and may vary on the physical scale ``hmax`` when the
    unit interval represents a segment of the given ``length``. ``refine``
    splits every panel into ``2**refine`` pieces.
    """
    # edges are kept as distances from 0 (left half) or from 1 (right half), so
    # panel widths near u = 1 do not suffer from rounding of 1 - tiny
    levels = max(1, math.ceil(math.log(2 * smallest) / math.log(ratio)))
    left = {0.0, 0.5}
    right = {0.0, 0.5}
    for k in range(1, levels + 1):
        if grade_left:
            left.add(0.5 * ratio**k)
        if grade_right:
            right.add(0.5 * ratio**k)
    halves = [np.array(sorted(left)), np.array(sorted(right))]
    if hmax is not None and hmax > 0:
        hu = hmax / length
        for j, e in enumerate(halves):
            fine = [e[0]]
            for lo, hi in zip(e[:-1], e[1:]):
                k = max(1, math.ceil((hi - lo) / hu - 1e-12))
                fine.extend(lo + (hi - lo) * np.arange(1, k + 1) / k)
            halves[j] = np.array(fine)
    if refine > 0:
        k = 2**refine
        for j, e in enumerate(halves):
            sub = (e[:-1, None] + (e[1:] - e[:-1])[:, None] * np.arange(k)[None, :] / k).ravel()
            halves[j] = np.append(sub, 0.5)
    # panels as (distance_lo, distance_hi, side); side 0 measures from u=0
    panels = [(a, b, 0) for a, b in zip(halves[0][:-1], halves[0][1:])]
    panels += [(a, b, 1) for a, b in zip(halves[1][:-1], halves[1][1:])][::-1]
    us, ws = [], []
    npan = len(panels)
    for i, (d0, d1, side) in enumerate(panels):
        width = d1 - d0
        pl = left_exp if i == 0 else 0.0
        qr = right_exp if i == npan - 1 else 0.0
        u, w = gauss_jacobi01(order, pl, qr)
        if side == 0:
            x = d0 + width * u
            c = 1.0 - x
        else:
            c = d1 - width * u
            x = 1.0 - c
        wt = w * width ** (1.0 + pl + qr)
        if i != 0 and left_exp != 0.0:
            wt = wt * x**left_exp
        if i != npan - 1 and right_exp != 0.0:
            wt = wt * c**right_exp
        us.append(x)
        ws.append(wt)
    u = np.concatenate(us)
    w = np.concatenate(ws)
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def _rule_key(x: float) -> float:
    # cache-friendly rounding of physical lengths
    return float(np.float32(x))


# --------------------------------------------------------------------------
# triangle integrals


_DECAY_CUT = 40.0


def exp_power_integral(a: float, gamma: complex, z, *, refine: int = 0) -> np.ndarray:
    """``F(z) = int_0^z exp(-gamma (z - x)) x^a dx`` for ``Re gamma > 0``.

    Vectorized over ``z >= 0``. For ``z`` far beyond the decay length the
    integral is taken over ``y = z - x in [0, 40/Re gamma]``.
    """
    if not a > -1:
        raise DomainError("exponent a must exceed -1")
    g = complex(gamma)
    lam = g.real
    if lam <= 0:
        raise DomainError("Re(gamma) must be positive")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.zeros(z.shape, dtype=complex)
    ycut = _DECAY_CUT / lam
    hphys = 0.5 / abs(g)
    near = (z > 0) & (z <= 2 * ycut)
    far = z > 2 * ycut
    if near.any():
        zn = z[near]
        u, w = graded_rule(
            _rule_key(zn.max()),
            left_exp=a,
            grade_left=False,
            grade_right=False,
            hmax=hphys,
            refine=refine,
        )
        e = np.exp(-g * zn[:, None] * (1.0 - u[None, :]))
        out[near] = zn ** (a + 1) * (e @ w)
    if far.any():
        zf = z[far]
        y, w = graded_rule(ycut, grade_left=False, grade_right=False, hmax=hphys, refine=refine)
        y = y * ycut
        w = w * ycut
        kern = np.exp(-g * y) * w
        out[far] = ((zf[:, None] - y[None, :]) ** a) @ kern
    return out


def triangle_integral(
    a: float,
    b: float,
    gamma: complex,
    t_end: float,
    weight: Callable[[np.ndarray], np.ndarray] | None = None,
    *,
    refine: int = 0,
) -> complex:
    """``W = iint_{0 <= x <= z <= T} exp(gamma (x - z)) x^a z^b weight(z) dx dz``.

    Uses ``u = x / z`` (inner, via ``exp_power_integral``) and geometrically
    growing outer panels; the origin behaviour ``z^(1+a+b)`` is absorbed by a
    Gauss-Jacobi panel. ``weight`` must be smooth on ``[0, T]``.
    """
    T = float(t_end)
    if not T > 0:
        raise DomainError("t_end must be positive")
    delta = 1.0 + a + b
    if not delta > -1:
        raise DomainError("1 + a + b must exceed -1 for integrability at the origin")
    g = complex(gamma)
    z0 = min(T, 0.5 / abs(g))
    order = 16 * 2**refine
    u, w0 = gauss_jacobi01(order, delta, 0.0)
    z_first = z0 * u
    # F(z) / z^(a+1) is entire, so the Jacobi weight carries z^delta
    f_first = exp_power_integral(a, g, z_first, refine=refine) / z_first ** (a + 1)
    wf = np.ones_like(z_first) if weight is None else np.asarray(weight(z_first))
    total = z0 ** (delta + 1) * np.sum(w0 * f_first * wf)
    if T > z0:
        growth = 1.5 ** (1.0 / 2**refine)
        k = max(1, math.ceil(math.log(T / z0) / math.log(growth)))
        edges = z0 * (T / z0) ** (np.arange(k + 1) / k)
        ul, wl = gauss_jacobi01(16, 0.0, 0.0)
        zs = (edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * ul[None, :]).ravel()
        ws = ((edges[1:] - edges[:-1])[:, None] * wl[None, :]).ravel()
        fz = exp_power_integral(a, g, zs, refine=refine)
        wz = np.ones_like(zs) if weight is None else np.asarray(weight(zs))
        total += np.sum(ws * fz * zs**b * wz)
    return complex(total)


# --------------------------------------------------------------------------
# expansions


class Regime(enum.Enum):
    DELTA_NEG = "DeltaNeg"
    DELTA_ZERO = "DeltaZero"
    DELTA_POS = "DeltaPos"


@dataclass(frozen=True)
class ExpansionResult:
    """Expansion value, quadrature value and their gap at one horizon.

    ``gap_order`` is the exponent ``p`` of the expected remainder ``O(T^p)``
    (``None`` when the remainder is only ``o(log T)``).
    """

    value_expansion: complex | float
    value_quadrature: complex | float
    abs_gap: float
    regime: Regime | None
    t_end: float
    gap_order: float | None = None
    details: dict = field(default_factory=dict, compare=False)


def _result(exp, quad, regime, T, order, **details) -> ExpansionResult:
    return ExpansionResult(exp, quad, float(abs(exp - quad)), regime, float(T), order, details)


def asym_key0(beta: float, t_end: float) -> ExpansionResult:
    """``exp(-T) int_0^T e^x x^beta dx`` against ``T^beta - beta T^(beta-1)``."""
    if not -1 < beta < 0:
        raise DomainError("beta must lie in (-1, 0)")
    T = float(t_end)
    if not T > 1:
        raise DomainError("t_end must exceed 1")
    quad = float(exp_power_integral(beta, 1.0, T)[0].real)
    exp = T**beta - beta * T ** (beta - 1)
    return _result(exp, quad, None, T, beta - 2)


def key_expansion(alpha1: float, alpha2: float, t_end: float) -> tuple[float, Regime, float | None]:
    """Regime-matched expansion of the ``e^(x-z) x^a1 z^a2`` triangle integral."""
    d = 1.0 + alpha1 + alpha2
    T = float(t_end)
    if abs(d) < 1e-14:
        return math.log(T), Regime.DELTA_ZERO, None
    if d < 0:
        v = special.gamma(d + 1) * special.beta(1 + alpha1, -d) + T**d / d
        return v, Regime.DELTA_NEG, d - 1
    v = T**d / d + alpha2 * special.gamma(d) * special.beta(1 + alpha1, 1 - d) - alpha1 / (alpha1 + alpha2) * T ** (d - 1)
    return v, Regime.DELTA_POS, d - 2


def asym_key(alpha1: float, alpha2: float, t_end: float) -> ExpansionResult:
    """``iint_{0<=x<=z<=T} e^(x-z) x^a1 z^a2`` against its regime expansion."""
    if not alpha1 > -1:
        raise DomainError("alpha1 must exceed -1")
    d = 1.0 + alpha1 + alpha2
    if not -1 < d < 1:
        raise DomainError("delta = 1 + alpha1 + alpha2 must lie in (-1, 1)")
    exp, regime, order = key_expansion(alpha1, alpha2, t_end)
    quad = triangle_integral(alpha1, alpha2, 1.0, t_end).real
    res = _result(exp, quad, regime, t_end, order)
    if regime is Regime.DELTA_ZERO:
        object.__setattr__(res, "details", {"ratio_to_log": quad / math.log(t_end)})
    return res


def kappa(h) -> float:
    """``-Gamma(2H) Gamma(4H-1) Gamma(3-4H) / (2 Gamma(2-2H))``."""
    H = as_hurst(h).h
    if H in (0.25, 0.75):
        raise DomainError("kappa has a pole at H = 1/4 and H = 3/4")
    return -special.gamma(2 * H) * special.gamma(4 * H - 1) * special.gamma(3 - 4 * H) / (2 * special.gamma(2 - 2 * H))


class CoroIntegral(enum.Enum):
    XZ = "XZ"
    ZX = "ZX"
    WEIGHTED = "Weighted"


def coro_expansion(gamma: complex, h, t_end: float, which: CoroIntegral | str) -> complex:
    which = CoroIntegral(which)
    H = as_hurst(h).h
    g = complex(gamma)
    T = float(t_end)
    k = kappa(H)
    if which is CoroIntegral.XZ:
        return (
            T ** (4 * H) / (4 * H * g)
            + (1 - 2 * H) / ((4 * H - 1) * g**2) * T ** (4 * H - 1)
            + 2 * H * k / g ** (1 + 4 * H)
            + (H - 1) / g**3 * T ** (4 * H - 2)
        )
    if which is CoroIntegral.ZX:
        return (
            T ** (4 * H) / (4 * H * g)
            - 2 * H / ((4 * H - 1) * g**2) * T ** (4 * H - 1)
            - 2 * H * k / g ** (1 + 4 * H)
            + H / g**3 * T ** (4 * H - 2)
        )
    return (
        T ** (4 * H) / (4 * H * g**2)
        + 2 * (1 - 2 * H) / ((4 * H - 1) * g**3) * T ** (4 * H - 1)
        + 2 * H * (4 * H + 1) * k / g ** (2 + 4 * H)
        + H / g**3 * T ** (4 * H - 2)
    )


def coro_quadrature(gamma: complex, h, t_end: float, which: CoroIntegral | str, *, refine: int = 0) -> complex:
    which = CoroIntegral(which)
    H = as_hurst(h).h
    b = 2 * H - 1
    if which is CoroIntegral.XZ:
        return triangle_integral(b, 2 * H, gamma, t_end, refine=refine)
    if which is CoroIntegral.ZX:
        return triangle_integral(2 * H, b, gamma, t_end, refine=refine)
    # (z - x) x^b z^(2H) = x^b z^(2H+1) - x^(2H) z^(2H)
    return triangle_integral(b, 2 * H + 1, gamma, t_end, refine=refine) - triangle_integral(
        2 * H, 2 * H, gamma, t_end, refine=refine
    )


def asym_coro(gamma, h, t_end: float, which: CoroIntegral | str) -> ExpansionResult:
    """Complex triangle integrals carrying ``kappa`` against their expansions.

    ``gamma`` may be a ``DriftParam`` or a complex number with positive real part.
    """
    g = complex(getattr(gamma, "gamma", gamma))
    if not g.real > 0:
        raise DomainError("Re(gamma) must be positive")
    H = as_hurst(h).h
    if not 0.25 < H < 0.5:
        raise DomainError("asym_coro requires H in (1/4, 1/2)")
    which = CoroIntegral(which)
    exp = coro_expansion(g, H, t_end, which)
    quad = coro_quadrature(g, H, t_end, which)
    order = 0.0 if which is CoroIntegral.WEIGHTED else 4 * H - 3
    return _result(exp, quad, None, t_end, order, which=which.value)


def gap_rate(results: list[ExpansionResult]) -> float:
    """Least-squares slope of ``log |gap|`` against ``log T``."""
    T = np.log([r.t_end for r in results])
    G = np.log([max(r.abs_gap, 1e-300) for r in results])
    return float(np.polyfit(T, G, 1)[0])


def upper_bound_ratio(beta: float, s) -> np.ndarray:
    """``exp(-s) int_0^s e^r r^beta dr / min(1, s^beta)`` for ``beta in (-1, 0)``."""
    if not -1 < beta < 0:
        raise DomainError("beta must lie in (-1, 0)")
    s = np.atleast_1d(np.asarray(s, dtype=float))
    # exp(-s) int_0^s e^r r^b dr is F with gamma = 1
    F = exp_power_integral(beta, 1.0, s).real
    return F / np.minimum(1.0, s**beta)
