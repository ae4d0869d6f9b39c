"""The alpha-order fBm ``xi`` and the alpha-fractional bridge ``Y``.

    xi_t = int_0^t (T - u)^(-alpha) dB_u,          0 < alpha < H,
    Y_t  = (T - t)^(g - H) int_0^t (T - u)^(-g) dB_u,   H < g < 1.

Limits ``t -> T`` are taken along ``t_k = T (1 - 2^-k)`` with RKHS
quadrature at each ``t_k`` and Richardson elimination of the known powers
of ``2^-k``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DomainError
from .fbm import HurstParam, Seed, UniformGrid, as_hurst, sample_fgn
from .quad import graded_rule, integrate_singular_1d, SingularWeight
from .rkhs import PiecewiseSmoothFn, grid_gram_inner, inner_product, norm_sq


class Method(enum.Enum):
    CLOSED_FORM = "ClosedForm"
    QUADRATURE = "Quadrature"
    MONTE_CARLO = "MonteCarlo"


@dataclass(frozen=True)
class BridgeParams:
    """Hurst exponent, kernel exponent and horizon.

    ``alpha`` is the exponent of ``(T - u)^(-alpha)``; the ``xi`` routines need
    ``alpha in (0, H)`` and the bridge routines need ``alpha in (H, 1)``.
    """

    h: HurstParam
    alpha: float
    t_end: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "h", as_hurst(self.h))
        if not (0 < self.alpha < 1):
            raise DomainError("exponent must lie in (0, 1)")
        if not self.t_end > 0:
            raise DomainError("t_end must be positive")

    @property
    def H(self) -> float:
        return self.h.h

    def require_xi(self) -> None:
        if not self.alpha < self.H:
            raise DomainError(f"xi needs alpha in (0, H), got alpha={self.alpha}, H={self.H}")

    def require_bridge(self) -> None:
        if not self.alpha > self.H:
            raise DomainError(f"bridge needs g_exp in (H, 1), got g_exp={self.alpha}, H={self.H}")


def _kernel(p: BridgeParams, a: float, b: float, scale: float = 1.0) -> PiecewiseSmoothFn:
    return PiecewiseSmoothFn.terminal_power(p.t_end, p.alpha, a, b, scale)


def dyadic_times(t_end: float, ks: Sequence[int]) -> np.ndarray:
    return t_end * (1.0 - 2.0 ** -np.asarray(ks, dtype=float))


def richardson(values: Sequence[float], rates: Sequence[float]) -> float:
    """Eliminate ``c_j 2^(-rates[j] k)`` terms from consecutive dyadic values.

    ``values`` are ordered by increasing ``k`` with unit step; each pass
    removes one rate and shortens the sequence by one.
    """
    v = list(values)
    for r in rates:
        if len(v) < 2:
            break
        q = 2.0 ** (-r)
        v = [(v[i + 1] - q * v[i]) / (1 - q) for i in range(len(v) - 1)]
    return float(v[-1])


@dataclass(frozen=True)
class LimitTrace:
    """Values along ``t_k`` and the extrapolated limit."""

    ks: tuple[int, ...]
    values: tuple[float, ...]
    limit: float
    rates: tuple[float, ...] = field(default=())


# --------------------------------------------------------------------------
# xi


def xi_closed_form(p: BridgeParams) -> float:
    p.require_xi()
    H, a, T = p.H, p.alpha, p.t_end
    return H / (H - a) * special.gamma(1 - a) * special.gamma(2 * H) / special.gamma(2 * H - a) * T ** (2 * (H - a))


def xi_quadrature_trace(p: BridgeParams, k_max: int = 12, k_min: int = 4) -> LimitTrace:
    """``E[xi_t^2]`` at ``t_k`` and its Richardson limit.

    The gap ``E[xi_T^2] - E[xi_t^2]`` has terms in ``eps^(2(H-alpha))`` and
    ``eps^(1-alpha)`` (``eps = T - t``), which are removed in turn.
    """
    p.require_xi()
    ks = tuple(range(k_min, k_max + 1))
    vals = tuple(norm_sq(_kernel(p, 0.0, t), p.H) for t in dyadic_times(p.t_end, ks))
    rates = (2 * (p.H - p.alpha), 1 - p.alpha, 1 - 2 * p.alpha + 2 * p.H)
    return LimitTrace(ks, vals, richardson(vals, rates), rates)


def xi_monte_carlo(
    p: BridgeParams,
    n_steps: int = 2**13,
    n_reps: int = 40000,
    seed: int = 20240,
    *,
    return_se: bool = False,
):
    """Sample second moment of the discretized ``xi_T``.

    Cells use the left-point kernel ``(T - t_k)^(-alpha)`` except the last,
    which uses the cell average ``dt^(-alpha) / (1 - alpha)``.
    """
    p.require_xi()
    if n_reps < 2:
        raise DomainError("n_reps must be at least 2")
    grid = UniformGrid(p.t_end, n_steps)
    w = mc_weights(p, n_steps)
    acc = []
    block = 1000
    for lo in range(0, n_reps, block):
        seeds = [Seed(seed, i) for i in range(lo, min(lo + block, n_reps))]
        dB = sample_fgn(p.h, grid, seeds)
        acc.append(dB @ w)
    x = np.concatenate(acc)
    m2 = float(np.mean(x**2))
    se = float(np.std(x**2, ddof=1) / math.sqrt(n_reps))
    return (m2, se) if return_se else m2


def mc_weights(p: BridgeParams, n_steps: int) -> np.ndarray:
    dt = p.t_end / n_steps
    t = np.arange(n_steps) * dt
    w = (p.t_end - t) ** (-p.alpha)
    w[-1] = dt ** (-p.alpha) / (1 - p.alpha)
    return w


def mc_expectation(p: BridgeParams, n_steps: int) -> float:
    """Exact mean of the Monte-Carlo estimator (its discretization target)."""
    from .fbm import increment_covariance

    w = mc_weights(p, n_steps)
    G = increment_covariance(p.h, UniformGrid(p.t_end, n_steps))
    return float(w @ G @ w)


def xi_second_moment(p: BridgeParams, method: Method | str = Method.CLOSED_FORM, **kw) -> float:
    """``E[xi_T^2]`` by closed form, RKHS quadrature limit or Monte Carlo."""
    method = Method(method)
    if method is Method.CLOSED_FORM:
        return xi_closed_form(p)
    if method is Method.QUADRATURE:
        return xi_quadrature_trace(p, **kw).limit
    return xi_monte_carlo(p, **kw)


# --------------------------------------------------------------------------
# bridge


def bridge_second_moment(h, g_exp: float) -> float:
    """``H^2 / (g - H) * B(2H, 1 + g - 2H)`` (independent of ``T``)."""
    p = BridgeParams(h, g_exp)
    p.require_bridge()
    H, g = p.H, g_exp
    return H**2 / (g - H) * special.beta(2 * H, 1 + g - 2 * H)


def bridge_second_moment_trace(h, g_exp: float, t_end: float = 1.0, k_max: int = 10, k_min: int = 3) -> LimitTrace:
    """``E[Y_t^2]`` at ``t_k`` and its Richardson limit.

    The gap to the limit carries ``eps^(2(g-H))``, ``eps^(1+g-2H)`` and
    ``eps`` terms, which are removed slowest first.
    """
    p = BridgeParams(h, g_exp, t_end)
    p.require_bridge()
    ks = tuple(range(k_min, k_max + 1))
    vals = []
    for t in dyadic_times(t_end, ks):
        eps = t_end - t
        vals.append(eps ** (2 * (g_exp - p.H)) * norm_sq(_kernel(p, 0.0, t), p.H))
    rates = tuple(sorted((2 * (g_exp - p.H), 1 + g_exp - 2 * p.H, 1.0)))
    return LimitTrace(ks, tuple(vals), richardson(vals, rates), rates)


def bridge_limit_terms(h, g_exp: float) -> dict[str, float]:
    """Limits of ``eps^(2(g-H))`` times each of ``H J1``, ``H J2``, ``H J3`` at ``s = 0``.

    ``eps^(2(g-H)) J2(0, t) -> B(2H, 1+g-2H)`` because the integrand
    concentrates at ``u = t`` on the scale ``eps``; the sum of the three
    limits is ``H g / (g - H) B(2H, 1+g-2H)``.
    """
    p = BridgeParams(h, g_exp)
    p.require_bridge()
    H, g = p.H, g_exp
    bb = special.beta(2 * H, 1 + g - 2 * H)
    terms = {"J1": H**2 / (g - H) * bb, "J2": H * bb, "J3": 0.0}
    terms["total"] = terms["J1"] + terms["J2"] + terms["J3"]
    return terms


def orthogonality_trace(h, g_exp: float, s: float, t_end: float = 1.0, k_max: int = 10, k_min: int = 4) -> LimitTrace:
    """``E[B_s Y_t]`` at ``t_k`` and its extrapolated limit.

    ``E[B_s Y_t] = eps^(g-H) <1_[0,s], (T-u)^(-g) 1_[0,t]>`` behaves like
    ``a eps^(g-H) + b eps^(1-H) + ...``; both terms are eliminated.
    """
    p = BridgeParams(h, g_exp, t_end)
    p.require_bridge()
    if not 0 <= s < t_end:
        raise DomainError("need 0 <= s < T")
    ks = tuple(range(k_min, k_max + 1))
    if s == 0:
        return LimitTrace(ks, tuple(0.0 for _ in ks), 0.0)
    ind = PiecewiseSmoothFn.indicator(0.0, s)
    vals = []
    for t in dyadic_times(t_end, ks):
        eps = t_end - t
        vals.append(eps ** (g_exp - p.H) * inner_product(ind, _kernel(p, 0.0, t), p.H))
    rates = (g_exp - p.H, 1 - p.H, 2 - p.H)
    return LimitTrace(ks, tuple(vals), richardson(vals, rates), rates)


def bridge_orthogonality(h, g_exp: float, s: float, t_end: float = 1.0, k: int = 10) -> float:
    """Extrapolated ``lim_{t -> T} E[B_s Y_t]`` using ``t_j`` up to ``j = k``."""
    return orthogonality_trace(h, g_exp, s, t_end, k_max=k).limit


# --------------------------------------------------------------------------
# structure function


def _j1(p: BridgeParams, s: float, t: float, order: int) -> float:
    H, a, T = p.H, p.alpha, p.t_end
    L = t - s
    # outer in u on [s, t]; inner I(u) = (t-u)^(2H) int_0^1 (T-u-(t-u)x)^(-a) x^(2H-1) dx
    uo, wo = graded_rule(float(np.float32(L)), right_exp=2 * H, order=order, hmax=0.25)
    u = s + L * uo
    xi_, wi = graded_rule(1.0, left_exp=2 * H - 1, order=order)
    d = t - u
    inner = ((T - u)[:, None] - d[:, None] * xi_[None, :]) ** (-a) @ wi
    vals = (T - u) ** (-a - 1) * inner
    return 2 * H * L ** (1 + 2 * H) * float(np.sum(wo * vals))


def structure_function(p: BridgeParams, s: float, t: float, *, rtol: float = 1e-10) -> float:
    """``E[(xi_s - xi_t)^2] = H (J1 + J2 + J3)`` for ``0 <= s, t < T``."""
    H, a, T = p.H, p.alpha, p.t_end
    s, t = sorted((float(s), float(t)))
    if s < 0 or t >= T:
        raise DomainError("need 0 <= s <= t < T")
    if t == s:
        return 0.0
    b = 2 * H - 1
    j2 = (T - t) ** (1 - a) * integrate_singular_1d(
        lambda u: (T - u) ** (-a - 1), SingularWeight(0.0, b, s, t), rtol=rtol, atol=0.0
    )
    j3 = (T - s) ** (-a) * integrate_singular_1d(
        lambda v: (T - v) ** (-a), SingularWeight(b, 0.0, s, t), rtol=rtol, atol=0.0
    )
    j1 = _j1(p, s, t, 16)
    return float(H * (j1 + j2 + j3))


def structure_function_rkhs(p: BridgeParams, s: float, t: float) -> float:
    """Same quantity as ``||(T-u)^(-alpha) 1_[s,t]||^2`` through ``rkhs``."""
    s, t = sorted((float(s), float(t)))
    return norm_sq(_kernel(p, s, t), p.H)


def structure_bound_constant(p: BridgeParams) -> float:
    """A ``T``-free constant ``C`` with ``sigma^2(s,t) <= C |s-t|^(2(H-alpha))``."""
    p.require_xi()
    H, a = p.H, p.alpha
    return H * ((H * special.beta(1 - a, 2 * H) + 0.5) / (H - a) + special.beta(1 - a, 2 * H - a))


def holder_exponent_estimate(
    p: BridgeParams,
    s: float | None = None,
    deltas: Sequence[float] | None = None,
) -> float:
    """Slope of ``0.5 log sigma^2`` against ``log delta``.

    With ``s=None`` the increments are anchored at the horizon,
    ``(T - 2 delta, T - delta)``, where the exponent is ``H - alpha``.
    Given ``s``, the pairs are ``(s, s + delta)``; away from ``T`` the
    exponent is ``H``.
    """
    p.require_xi()
    T = p.t_end
    ds = np.asarray(deltas if deltas is not None else T * 2.0 ** -np.arange(4, 11), dtype=float)
    vals = []
    for d in ds:
        if s is None:
            vals.append(structure_function(p, T - 2 * d, T - d))
        else:
            if not s + d < T:
                raise DomainError("s + delta must stay below T")
            vals.append(structure_function(p, s, s + d))
    return float(np.polyfit(np.log(ds), 0.5 * np.log(vals), 1)[0])


# --------------------------------------------------------------------------
# tables


TABLE_COLUMNS = ("quantity", "closed_form", "quadrature", "monte_carlo", "rel_gap")


def max_rel_gap(values: Sequence[float]) -> float:
    v = [x for x in values if x is not None and np.isfinite(x)]
    return float(max(abs(a - b) / max(abs(a), abs(b)) for i, a in enumerate(v) for b in v[i + 1 :])) if len(v) > 1 else 0.0


def moment_table(
    p: BridgeParams,
    *,
    methods: Sequence[Method | str] = tuple(Method),
    n_steps: int = 2**13,
    n_reps: int = 40000,
    seed: int = 20240,
    g_exp: float | None = None,
) -> list[tuple]:
    """Rows ``(quantity, closed_form, quadrature, monte_carlo, rel_gap)``."""
    ms = {Method(m) for m in methods}
    cf = xi_closed_form(p) if Method.CLOSED_FORM in ms else float("nan")
    qd = xi_quadrature_trace(p).limit if Method.QUADRATURE in ms else float("nan")
    mc = xi_monte_carlo(p, n_steps, n_reps, seed) if Method.MONTE_CARLO in ms else float("nan")
    rows = [("E[xi_T^2]", cf, qd, mc, max_rel_gap([cf, qd, mc]))]
    if g_exp is not None:
        bcf = bridge_second_moment(p.h, g_exp)
        bq = bridge_second_moment_trace(p.h, g_exp, p.t_end).limit if Method.QUADRATURE in ms else float("nan")
        rows.append(("E[Y_T^2]", bcf, bq, float("nan"), max_rel_gap([bcf, bq])))
    return rows
