"""Inner products in the reproducing-kernel Hilbert space of fBm.

For ``H < 1/2`` the inner product of bounded-variation functions is written
through the Lebesgue-Stieltjes measure of the second argument,

    <f, g> = H * iint f(t) |t - s|^(2H-1) sgn(t - s) dt conj(nu_g)(ds),

where ``nu_g`` is the derivative of ``g`` (extended by zero) and carries
atoms at the ends of each smooth piece. For ``H > 1/2`` the classical
kernel ``H(2H-1)|t - s|^(2H-2)`` is used, and ``H = 1/2`` is plain ``L^2``.

``grid_gram_inner`` is an independent brute-force oracle: project on step
functions and contract with the fBm increment covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import AccuracyError, DomainError
from .fbm import as_hurst, increment_gram
from .quad import DEFAULT_ATOL, DEFAULT_RTOL, MAX_LEVEL, graded_rule

Evaluator = Callable[[np.ndarray], np.ndarray]

ATOM_DROP = 1e-14
MASS_TOL = 1e-10


def _const(c: complex) -> Evaluator:
    return lambda t: np.full(np.shape(t), c, dtype=complex if isinstance(c, complex) else float)


@dataclass(frozen=True)
class Piece:
    """Smooth density ``value`` on ``[a, b]`` with derivative ``derivative``."""

    a: float
    b: float
    value: Evaluator
    derivative: Evaluator

    def __post_init__(self):
        if not (self.b > self.a):
            raise DomainError(f"piece interval must satisfy a < b, got [{self.a}, {self.b}]")
        if self.a < 0:
            raise DomainError("pieces must lie in [0, T]")


@dataclass(frozen=True)
class PiecewiseSmoothFn:
    """Bounded-variation function made of smooth pieces with disjoint interiors."""

    pieces: tuple[Piece, ...]

    def __post_init__(self):
        ps = tuple(sorted(self.pieces, key=lambda p: p.a))
        for p, q in zip(ps[:-1], ps[1:]):
            if q.a < p.b - 1e-15:
                raise DomainError("piece intervals overlap")
        object.__setattr__(self, "pieces", ps)

    # constructors ---------------------------------------------------------

    @classmethod
    def from_callable(cls, value: Evaluator, derivative: Evaluator, a: float, b: float) -> "PiecewiseSmoothFn":
        return cls((Piece(float(a), float(b), value, derivative),))

    @classmethod
    def indicator(cls, a: float, b: float, c: complex = 1.0) -> "PiecewiseSmoothFn":
        return cls.from_callable(_const(c), _const(0.0 * c), a, b)

    @classmethod
    def exponential(cls, rate: complex, a: float, b: float, scale: complex = 1.0) -> "PiecewiseSmoothFn":
        """``scale * exp(-rate * t)`` on ``[a, b]``."""
        return cls.from_callable(
            lambda t: scale * np.exp(-rate * np.asarray(t)),
            lambda t: -rate * scale * np.exp(-rate * np.asarray(t)),
            a,
            b,
        )

    @classmethod
    def polynomial(cls, coeffs: Sequence[float], a: float, b: float) -> "PiecewiseSmoothFn":
        """``sum_k coeffs[k] t^k`` on ``[a, b]``."""
        p = np.polynomial.Polynomial(coeffs)
        dp = p.deriv()
        return cls.from_callable(lambda t: p(np.asarray(t, dtype=float)), lambda t: dp(np.asarray(t, dtype=float)), a, b)

    @classmethod
    def terminal_power(cls, t_end: float, exponent: float, a: float, b: float, scale: float = 1.0) -> "PiecewiseSmoothFn":
        """``scale * (T - u)^(-exponent)`` on ``[a, b]`` with ``b < T``."""
        if not b < t_end:
            raise DomainError("terminal power requires b < T")
        T, e = float(t_end), float(exponent)
        return cls.from_callable(
            lambda u: scale * (T - np.asarray(u)) ** (-e),
            lambda u: scale * e * (T - np.asarray(u)) ** (-e - 1.0),
            a,
            b,
        )

    # algebra --------------------------------------------------------------

    def __add__(self, other: "PiecewiseSmoothFn") -> "PiecewiseSmoothFn":
        return PiecewiseSmoothFn(self.pieces + other.pieces)

    def conj(self) -> "PiecewiseSmoothFn":
        return PiecewiseSmoothFn(
            tuple(
                Piece(p.a, p.b, (lambda v: lambda t: np.conj(v(t)))(p.value), (lambda d: lambda t: np.conj(d(t)))(p.derivative))
                for p in self.pieces
            )
        )

    # evaluation -----------------------------------------------------------

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        done = np.zeros(t.shape, dtype=bool)
        for p in self.pieces:
            m = (t >= p.a) & (t <= p.b) & ~done
            if m.any():
                out[m] = p.value(t[m])
                done |= m
        return out if self.is_complex else out.real

    @property
    def support(self) -> tuple[float, float]:
        return self.pieces[0].a, max(p.b for p in self.pieces)

    @property
    def is_complex(self) -> bool:
        for p in self.pieces:
            x = np.linspace(p.a, p.b, 3)
            if np.iscomplexobj(p.value(x)) and np.any(np.imag(p.value(x)) != 0):
                return True
        return False


@dataclass(frozen=True)
class AtomicMeasure:
    """Density pieces plus point masses.

    ``density`` holds ``(a, b, q)`` triples; ``atoms`` holds ``(location, mass)``.
    """

    density: tuple[tuple[float, float, Evaluator], ...]
    atoms: tuple[tuple[float, complex], ...]
    _mass_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def integrate(self, fn: Evaluator, *, order: int = 16) -> complex:
        """``int fn dnu`` (density by graded quadrature plus atoms)."""
        total = 0j
        for a, b, q in self.density:
            u, w = graded_rule(float(np.float32(b - a)), hmax=0.5, order=order)
            x = a + (b - a) * u
            total += (b - a) * np.sum(w * fn(x) * q(x))
        for c, m in self.atoms:
            total += m * complex(np.asarray(fn(np.array([c])))[0])
        return total

    def total_mass(self) -> complex:
        if "mass" not in self._mass_cache:
            self._mass_cache["mass"] = self.integrate(lambda x: np.ones_like(x))
        return self._mass_cache["mass"]

    def conj(self) -> "AtomicMeasure":
        return AtomicMeasure(
            tuple((a, b, (lambda q: lambda s: np.conj(q(s)))(q)) for a, b, q in self.density),
            tuple((c, np.conj(m)) for c, m in self.atoms),
        )


def bv_measure(g: PiecewiseSmoothFn) -> AtomicMeasure:
    """Lebesgue-Stieltjes measure of ``g`` extended by zero outside its pieces.

    Density is the piecewise derivative; each piece ``[a, b]`` adds atoms
    ``+g(a)`` at ``a`` and ``-g(b)`` at ``b``. Coincident atoms merge and
    masses below ``1e-14`` are dropped.
    """
    dens = tuple((p.a, p.b, p.derivative) for p in g.pieces)
    merged: dict[float, complex] = {}
    for p in g.pieces:
        ha = complex(np.asarray(p.value(np.array([p.a])))[0])
        hb = complex(np.asarray(p.value(np.array([p.b])))[0])
        merged[p.a] = merged.get(p.a, 0j) + ha
        merged[p.b] = merged.get(p.b, 0j) - hb
    real = not g.is_complex
    atoms = []
    for c in sorted(merged):
        m = merged[c]
        if abs(m) < ATOM_DROP:
            continue
        atoms.append((c, m.real if real else m))
    return AtomicMeasure(dens, tuple(atoms))


# --------------------------------------------------------------------------
# vectorized kernel integrals


@dataclass(frozen=True)
class _Rules:
    order: int
    hmax: float

    def seg(self, length: float, left_exp: float = 0.0, right_exp: float = 0.0):
        return graded_rule(float(np.float32(length)), left_exp=left_exp, right_exp=right_exp, hmax=self.hmax, order=self.order)


def _segment(fn: Evaluator, lo: float, hi: float, rules: _Rules, left_exp: float = 0.0, right_exp: float = 0.0) -> complex:
    """``int_lo^hi fn(t) (t-lo)^left_exp (hi-t)^right_exp dt``."""
    L = hi - lo
    u, w = rules.seg(L, left_exp, right_exp)
    return L ** (1.0 + left_exp + right_exp) * np.sum(w * fn(lo + L * u))


def _potential(t: np.ndarray, a: float, b: float, q: Evaluator, beta: float, odd: bool, rules: _Rules) -> np.ndarray:
    """``Phi(t) = int_a^b q(s) |t-s|^beta sgn(t-s)^odd ds`` for a vector ``t``."""
    out = np.zeros(t.shape, dtype=complex)
    L = b - a
    sgn_right = -1.0 if odd else 1.0
    inside = (t >= a) & (t <= b)
    outside = ~inside
    if outside.any():
        u, w = rules.seg(L)
        s = a + L * u
        qs = q(s) * w * L
        to = t[outside]
        kern = np.abs(to[:, None] - s[None, :]) ** beta
        if odd:
            kern = kern * np.sign(to[:, None] - s[None, :])
        out[outside] = kern @ qs
    if inside.any():
        ti = t[inside]
        u, w = rules.seg(L, left_exp=beta)
        # s < t : s = t - (t - a) u
        Ll = ti - a
        vl = q(ti[:, None] - Ll[:, None] * u[None, :]) @ w
        left = np.where(Ll > 0, np.abs(Ll) ** (beta + 1.0) * vl, 0.0)
        # s > t : s = t + (b - t) u
        Lr = b - ti
        vr = q(ti[:, None] + Lr[:, None] * u[None, :]) @ w
        right = np.where(Lr > 0, np.abs(Lr) ** (beta + 1.0) * vr, 0.0)
        out[inside] = left + sgn_right * right
    return out


def _cuts(lo: float, hi: float, points: Iterable[float]) -> list[float]:
    pts = sorted({lo, hi} | {p for p in points if lo < p < hi})
    return pts


_CHUNK = 128


def _outer(fn_f: Evaluator, lo: float, hi: float, potential: Callable[[np.ndarray], np.ndarray], rules: _Rules) -> complex:
    L = hi - lo
    u, w = rules.seg(L)
    t = lo + L * u
    acc = 0j
    for k in range(0, t.size, _CHUNK):
        tk = t[k : k + _CHUNK]
        acc += np.sum(w[k : k + _CHUNK] * fn_f(tk) * np.conj(potential(tk)))
    return L * acc


def _inner_once(f: PiecewiseSmoothFn, g: PiecewiseSmoothFn, H: float, rules: _Rules) -> complex:
    if H == 0.5:
        total = 0j
        for p in f.pieces:
            for r in g.pieces:
                lo, hi = max(p.a, r.a), min(p.b, r.b)
                if hi > lo:
                    total += _segment(lambda t: p.value(t) * np.conj(r.value(t)), lo, hi, rules)
        return total
    if H > 0.5:
        beta = 2 * H - 2
        total = 0j
        for p in f.pieces:
            ends = [x for r in g.pieces for x in (r.a, r.b)]
            for lo, hi in zip(*(lambda c: (c[:-1], c[1:]))(_cuts(p.a, p.b, ends))):
                pot = lambda tt: sum(_potential(tt, r.a, r.b, r.value, beta, False, rules) for r in g.pieces)
                total += _outer(p.value, lo, hi, pot, rules)
        return H * (2 * H - 1) * total
    beta = 2 * H - 1
    nu = bv_measure(g)
    total = 0j
    for p in f.pieces:
        # atoms: int f(t) |t-c|^beta sgn(t-c) dt with the singularity at c
        for c, m in nu.atoms:
            if p.a < c < p.b:
                part = -_segment(p.value, p.a, c, rules, right_exp=beta) + _segment(p.value, c, p.b, rules, left_exp=beta)
            elif c <= p.a:
                part = _segment(p.value, p.a, p.b, rules, left_exp=beta) if c == p.a else _segment(
                    lambda t: p.value(t) * (t - c) ** beta, p.a, p.b, rules
                )
            else:
                part = -_segment(p.value, p.a, p.b, rules, right_exp=beta) if c == p.b else -_segment(
                    lambda t: p.value(t) * (c - t) ** beta, p.a, p.b, rules
                )
            total += np.conj(m) * part
        # density: cusps of the potential sit at the density piece ends
        ends = [x for a, b, _ in nu.density for x in (a, b)]
        cuts = _cuts(p.a, p.b, ends)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            pot = lambda tt: sum(_potential(tt, a, b, q, beta, True, rules) for a, b, q in nu.density)
            total += _outer(p.value, lo, hi, pot, rules)
    return H * total


def inner_product(
    f: PiecewiseSmoothFn,
    g: PiecewiseSmoothFn,
    h,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_level: int = MAX_LEVEL,
    hmax: float = 0.5,
    order: int = 10,
):
    """RKHS inner product ``<f, g>``, conjugate-linear in ``g``.

    Refinement raises the Gauss order of every panel by 2 per level until two
    successive levels agree to ``rtol * |value| + atol``.

    Raises:
        AccuracyError: no convergence within ``max_level`` levels; carries the
            last estimate and the last level-to-level change.
    """
    H = as_hurst(h).h
    prev = None
    for level in range(max_level + 1):
        val = _inner_once(f, g, H, _Rules(order + 2 * level, hmax))
        if prev is not None and abs(val - prev) <= rtol * abs(val) + atol:
            break
        prev_diff = None if prev is None else abs(val - prev)
        prev = val
    else:
        raise AccuracyError("inner_product did not converge", estimate=val, error_bound=prev_diff)
    if not (f.is_complex or g.is_complex):
        return float(val.real)
    return complex(val)


def norm_sq(f: PiecewiseSmoothFn, h, **kw) -> float:
    return float(np.real(inner_product(f, f, h, **kw)))


def grid_gram_inner(f: PiecewiseSmoothFn, g: PiecewiseSmoothFn, h, n: int, t_end: float | None = None):
    """Step-function oracle ``v_f^T G conj(v_g)`` on ``n`` uniform cells.

    Cells cover ``[0, T]`` with ``T`` the right end of the joint support
    unless ``t_end`` is given; cell values are midpoint evaluations.
    """
    if n < 8:
        raise DomainError("grid_gram_inner needs n >= 8")
    T = float(t_end) if t_end is not None else max(f.support[1], g.support[1])
    edges = np.linspace(0.0, T, n + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    G = increment_gram(h, edges)
    vf, vg = f(mid), g(mid)
    val = vf @ G @ np.conj(vg)
    if not (f.is_complex or g.is_complex):
        return float(np.real(val))
    return complex(val)


def gram_matrix(fns: Sequence[PiecewiseSmoothFn], h, **kw) -> np.ndarray:
    """Matrix ``[<f_i, f_j>]`` (Hermitian)."""
    k = len(fns)
    M = np.zeros((k, k), dtype=complex)
    for i in range(k):
        for j in range(i, k):
            M[i, j] = inner_product(fns[i], fns[j], h, **kw)
            M[j, i] = np.conj(M[i, j])
    return M
