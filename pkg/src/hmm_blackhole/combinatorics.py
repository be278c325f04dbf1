"""Formal-derivative combinatorics behind the stabilization argument.

Coefficients are exact ``Fraction`` values.  Floating point appears only when
an expansion is evaluated on a jet, which is how the expansions are checked
against direct Taylor arithmetic.

A jet ``y`` of order ``K`` is read as the derivative vector
``(y, y', ..., y^(K))`` at a point; ``series_*`` from :mod:`jets` supplies the
reference derivatives.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ModelError, NonpositiveConstantTerm, OverflowGuard
from .jets import Jet, series_div, series_derivative, series_log, series_xlogx

BINOMIAL_GUARD = 62
INTEGER_TOL = 1e-9


def _as_partition(parts) -> tuple[int, ...]:
    p = tuple(int(a) for a in parts)
    if not p or any(a < 1 for a in p) or any(p[i] < p[i + 1] for i in range(len(p) - 1)):
        raise ModelError(f"{parts!r} is not a nonincreasing sequence of positive integers")
    return p


def partitions(n: int) -> list[tuple[int, ...]]:
    """Partitions of ``n`` with parts in nonincreasing order, reverse-lexicographic."""
    if n < 1:
        raise ValueError("n must be positive")
    out = []

    def rec(remaining, largest, prefix):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for a in range(min(remaining, largest), 0, -1):
            prefix.append(a)
            rec(remaining - a, a, prefix)
            prefix.pop()

    rec(n, n, [])
    return out


def permutation_count(parts) -> int:
    """Number of distinct orderings of ``parts``: ``m! / (m_1! ... m_j!)``."""
    p = _as_partition(parts)
    count = math.factorial(len(p))
    for mult in Counter(p).values():
        count //= math.factorial(mult)
    return count


def coefficient_closed_form(parts) -> Fraction:
    """``(-1)^(m+1) (1/m) P(a) (sum a)! / prod a_i!``."""
    p = _as_partition(parts)
    m = len(p)
    multinomial = math.factorial(sum(p))
    for a in p:
        multinomial //= math.factorial(a)
    return Fraction((-1) ** (m + 1) * permutation_count(p) * multinomial, m)


@lru_cache(maxsize=None)
def _recursion(p: tuple[int, ...]) -> Fraction:
    if p == (1,):
        return Fraction(1)
    total = Fraction(0)
    for v in sorted({a for a in p if a >= 2}, reverse=True):
        b = list(p)
        b[b.index(v)] = v - 1
        b = tuple(sorted(b, reverse=True))
        total += b.count(v - 1) * _recursion(b)
    if p[-1] == 1:
        if len(p) == 1:
            raise AssertionError("unreachable: (1,) handled above")
        total -= (len(p) - 1) * _recursion(p[:-1])
    return total


def coefficient_recursion(parts) -> Fraction:
    """Same coefficient built from ``C_[1] = 1`` by the differentiation recursion.

    Differentiating ``y^(b_1) ... y^(b_m) / y^m`` raises one factor's order
    by one, giving weight ``D`` = multiplicity of the raised value among the
    ``b``; the quotient rule adds ``-(m-1) C_[a_1..a_{m-1}]`` when ``a_m = 1``.
    """
    return _recursion(_as_partition(parts))


def _jet_coeffs(y) -> np.ndarray:
    c = y.coeffs if isinstance(y, Jet) else np.asarray(y, dtype=float)
    if c[0] <= 0:
        raise NonpositiveConstantTerm("expansion needs a positive constant term")
    return c


def _derivs(c: np.ndarray) -> np.ndarray:
    return c * np.array([math.factorial(k) for k in range(len(c))], dtype=float)


def yprime_over_y_expansion(n: int) -> list[tuple[tuple[int, ...], Fraction]]:
    """Terms of ``(y'/y)^(n) = sum C_[a] y^(a_1) ... y^(a_m) / y^m`` over partitions of ``n+1``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return [(p, coefficient_closed_form(p)) for p in partitions(n + 1)]


def evaluate_yprime_over_y(n: int, y) -> tuple[float, float]:
    """``(expansion value, reference value)`` of ``(y'/y)^(n)`` on a jet of order >= n+1."""
    c = _jet_coeffs(y)
    if len(c) < n + 2:
        raise ValueError(f"jet of order {len(c) - 1} is too short for n = {n}")
    d = _derivs(c)
    terms = []
    for p, coef in yprime_over_y_expansion(n):
        prod = float(coef)
        for a in p:
            prod *= d[a] / d[0]
        terms.append(prod)
    ratio = series_div(series_derivative(c), c[:-1])
    return math.fsum(terms), float(ratio[n] * math.factorial(n))


def high_low_orders(order: int) -> tuple[int, int]:
    """``(first High index, last Low index) = (ceil((N+1)/2), ceil((N-1)/2))``."""
    return (order + 2) // 2, order // 2


def _ylogy_derivative(d: np.ndarray, order: int) -> float:
    c = d[: order + 1] / np.array([math.factorial(k) for k in range(order + 1)], dtype=float)
    return float(series_xlogx(c)[order] * math.factorial(order))


@dataclass(frozen=True)
class YLogYSplit:
    order: int
    total: float
    high: float
    low: float
    pieces: tuple[float, ...]

    @property
    def residual(self) -> float:
        return abs(self.high + self.low - self.total)


def ylogy_split(order: int, y) -> YLogYSplit:
    """``(y log y)^(N)`` with its High/Low split on a positive jet of order >= N.

    Each monomial of the N-th derivative is assigned to its highest
    derivative factor; ``pieces[i]`` collects those whose top factor is
    ``y^(i)``.  It is computed as ``F(y, ..., y^(i), 0, ...) - F(y, ...,
    y^(i-1), 0, ...)`` where ``F`` is the full derivative expression, which is
    exact because ``F`` is a polynomial in the higher derivatives.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    c = _jet_coeffs(y)
    if len(c) < order + 1:
        raise ValueError(f"jet of order {len(c) - 1} is too short for N = {order}")
    d = _derivs(c)[: order + 1]
    partial = []
    for i in range(order + 1):
        t = d.copy()
        t[i + 1 :] = 0.0
        partial.append(_ylogy_derivative(t, order))
    pieces = [partial[0]] + [partial[i] - partial[i - 1] for i in range(1, order + 1)]
    first_high, last_low = high_low_orders(order)
    high = math.fsum(pieces[first_high:])
    low = math.fsum(pieces[1 : last_low + 1])
    return YLogYSplit(order, partial[-1], high, low, tuple(pieces))


def high_coefficient_ratio(order: int, i: int, y) -> float:
    """``q_i[y] / (log y + 1)^(N-i)`` for a High index ``i``."""
    first_high, _ = high_low_orders(order)
    if not first_high <= i <= order:
        raise ValueError(f"{i} is not a High index for N = {order}")
    c = _jet_coeffs(y)
    split = ylogy_split(order, c)
    d = _derivs(c)
    q_i = split.pieces[i] / d[i]
    log1 = series_log(c[: order + 1])
    log1[0] += 1.0
    k = order - i
    return q_i / float(log1[k] * math.factorial(k))


def random_positive_jet(rng: np.random.Generator, order: int) -> np.ndarray:
    """Taylor coefficients with constant term in ``[0.5, 2]`` and others in ``[-1, 1]``."""
    c = rng.uniform(-1.0, 1.0, order + 1)
    c[0] = rng.uniform(0.5, 2.0)
    return c


@dataclass(frozen=True)
class YLogYExpansion:
    """Integer High coefficients ``C_{i,N}`` with ``q_i = C_{i,N} (log y + 1)^(N-i)``."""

    order: int
    coefficients: dict[int, int]
    max_spread: float

    def evaluate(self, y) -> YLogYSplit:
        return ylogy_split(self.order, y)

    def high_from_coefficients(self, y) -> float:
        """High_N rebuilt from the frozen integers, for comparison with the split."""
        c = _jet_coeffs(y)
        d = _derivs(c)
        log1 = series_log(c[: self.order + 1])
        log1[0] += 1.0
        terms = [
            cf * float(log1[self.order - i] * math.factorial(self.order - i)) * d[i]
            for i, cf in self.coefficients.items()
        ]
        return math.fsum(terms)


def ylogy_expansion(order: int, samples: int = 8, seed: int = 0) -> YLogYExpansion:
    """Extract ``C_{i,N}`` on random jets, checking they are the same integer every time."""
    rng = np.random.default_rng(seed)
    jets = [random_positive_jet(rng, order) for _ in range(samples)]
    first_high, _ = high_low_orders(order)
    coeffs = {}
    spread = 0.0
    for i in range(first_high, order + 1):
        ratios = np.array([high_coefficient_ratio(order, i, y) for y in jets])
        nearest = round(float(np.median(ratios)))
        dev = float(np.max(np.abs(ratios - nearest)))
        if dev > INTEGER_TOL * max(1.0, abs(nearest)):
            raise ArithmeticError(f"q_{i} / (log y + 1)^({order - i}) is not a constant integer (spread {dev:.3g})")
        coeffs[i] = int(nearest)
        spread = max(spread, dev)
    return YLogYExpansion(order, coeffs, spread)


def low_part(order: int, y) -> float:
    return ylogy_split(order, y).low


def mixed_fourth_difference(fn, a, x, da1, da2, dx1, dx2, h: float = 0.05) -> float:
    """Forward difference of ``fn(a, x)`` twice along ``a`` and twice along ``x``.

    If ``fn(a, x) = sum_i r_i[a] x^(i) + sum_i s_i[x] a^(i)`` then every such
    difference vanishes identically: the first sum is linear in ``x`` and
    the second linear in ``a``.  A generic product of ``a`` and ``x`` terms
    gives an O(h^4) nonzero value instead.
    """
    vals = []
    for s1 in (0, 1):
        for s2 in (0, 1):
            for s3 in (0, 1):
                for s4 in (0, 1):
                    sign = (-1) ** (4 - s1 - s2 - s3 - s4)
                    aa = a + h * (s1 * da1 + s2 * da2)
                    xx = x + h * (s3 * dx1 + s4 * dx2)
                    vals.append(sign * fn(aa, xx))
    return math.fsum(vals)


@dataclass(frozen=True)
class LowPartReport:
    order: int
    truncation_residual: float
    unit_a_residual: float
    unit_x_residual: float
    separability_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        worst = max(self.truncation_residual, self.unit_a_residual, self.unit_x_residual, self.separability_residual)
        return worst < self.tol


def lowpart_structure_check(order: int, samples: int = 20, seed: int = 0, tol: float = 1e-9) -> LowPartReport:
    """Numerical check of the Low_N product structure on random jet pairs.

    ``Low_N[a x]`` may only involve derivatives of ``a`` and ``x`` up to order
    ``ceil((N-1)/2)``: changing higher coefficients of either factor must
    leave it unchanged.  With ``a = 1`` it reduces to ``Low_N[x]``, and with
    ``x = 1`` to ``Low_N[a]``.  Separability into terms linear in one factor's
    derivatives is probed with :func:`mixed_fourth_difference`.
    """
    if order < 2:
        raise ValueError("order must be at least 2")
    _, last_low = high_low_orders(order)
    rng = np.random.default_rng(seed)
    one = np.zeros(order + 1)
    one[0] = 1.0
    trunc = unit_a = unit_x = sep = 0.0

    def low_of_product(aa, xx):
        return low_part(order, series_mul_trunc(aa, xx))

    for _ in range(samples):
        a = random_positive_jet(rng, order)
        x = random_positive_jet(rng, order)
        base = low_part(order, series_mul_trunc(a, x))
        a2, x2 = a.copy(), x.copy()
        a2[last_low + 1 :] = rng.uniform(-1, 1, order - last_low)
        x2[last_low + 1 :] = rng.uniform(-1, 1, order - last_low)
        scale = max(1.0, abs(base))
        trunc = max(trunc, abs(low_part(order, series_mul_trunc(a2, x2)) - base) / scale)
        unit_a = max(unit_a, abs(low_part(order, series_mul_trunc(one, x)) - low_part(order, x)))
        unit_x = max(unit_x, abs(low_part(order, series_mul_trunc(a, one)) - low_part(order, a)))
        dirs = [np.zeros(order + 1) for _ in range(4)]
        for v in dirs:
            v[: last_low + 1] = rng.uniform(-1, 1, last_low + 1)
        sep = max(sep, abs(mixed_fourth_difference(low_of_product, a, x, *dirs)) / scale)
    return LowPartReport(order, trunc, unit_a, unit_x, sep, tol)


def series_mul_trunc(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (Jet(a) * Jet(b)).coeffs


@dataclass(frozen=True)
class BinomialMoments:
    n: int
    s1: int
    s2: int
    s1_closed: int
    s2_closed: int

    @property
    def holds(self) -> bool:
        return self.s1 == self.s1_closed and self.s2 == self.s2_closed


def binomial_moment_identities(n: int) -> BinomialMoments:
    """``sum i C(n,i) = n 2^(n-1)`` and ``sum i^2 C(n,i) = n(n-1) 2^(n-2) + n 2^(n-1)``, exactly."""
    if not 0 <= n <= BINOMIAL_GUARD:
        raise OverflowGuard(f"n = {n} outside 0..{BINOMIAL_GUARD}")
    s1 = sum(i * math.comb(n, i) for i in range(n + 1))
    s2 = sum(i * i * math.comb(n, i) for i in range(n + 1))
    # written with Fractions so n = 0 and n = 1 need no special-casing of 2^(n-2)
    c1 = Fraction(n) * Fraction(2) ** (n - 1)
    c2 = Fraction(n * (n - 1)) * Fraction(2) ** (n - 2) + c1
    if c1.denominator != 1 or c2.denominator != 1:
        raise AssertionError("closed forms must be integers")
    return BinomialMoments(n, s1, s2, int(c1), int(c2))
