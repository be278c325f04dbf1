"""Binary Markov chain observed through a binary symmetric channel.

With ``a_n = p(z_1^n, y_n = 0)`` and ``b_n = p(z_1^n, y_n = 1)`` the likelihood
ratio ``x_n = a_n / b_n`` evolves by ``x_n = f_{z_n}(x_{n-1})`` from the
stationary ratio ``x_0 = pi10 / pi01``, where

    f_z(x) = c_z * (pi00 x + pi10) / (pi01 x + pi11),
    c_0 = (1 - eps) / eps,  c_1 = eps / (1 - eps).

Words are encoded as integers, first symbol most significant, and the word
``i_1 .. i_n`` is applied in order: ``F_w = f_{i_n} o ... o f_{i_1}``.
Cylinder ``I_w`` is ``F_w([p1, p0])``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EnumerationTooLarge,
    ModelError,
    NegativeState,
    NotNonOverlapping,
    RegimeViolation,
)
from .hmm_core import HiddenMarkovModel
from .jets import ModelCurve

LEVEL_GUARD = 2**26
BOUNDARY_TOL = 1e-12
DEDUP_TOL = 1e-14
MASS_RTOL = 1e-12
LOG2 = math.log(2.0)


@dataclass(frozen=True)
class BinaryChainParams:
    pi: tuple[tuple[float, float], tuple[float, float]]
    epsilon: float

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        if pi.shape != (2, 2):
            raise ModelError(f"pi must be 2x2, got shape {pi.shape}")
        if np.any(pi < 0) or np.any(pi > 1):
            raise ModelError("pi entries must lie in [0, 1]")
        for i in range(2):
            if abs(pi[i].sum() - 1.0) > 1e-12:
                raise ModelError(f"row {i} of pi sums to {pi[i].sum()!r}")
        if not 0.0 <= self.epsilon <= 0.5:
            raise ModelError(f"crossover probability {self.epsilon} outside [0, 1/2]")
        object.__setattr__(self, "pi", tuple(tuple(float(v) for v in row) for row in pi))
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @classmethod
    def from_flat(cls, values, epsilon: float) -> "BinaryChainParams":
        v = [float(x) for x in values]
        if len(v) != 4:
            raise ModelError("expected four transition probabilities pi00,pi01,pi10,pi11")
        return cls(((v[0], v[1]), (v[2], v[3])), epsilon)

    def with_epsilon(self, epsilon: float) -> "BinaryChainParams":
        return BinaryChainParams(self.pi, epsilon)

    @property
    def p00(self) -> float:
        return self.pi[0][0]

    @property
    def p01(self) -> float:
        return self.pi[0][1]

    @property
    def p10(self) -> float:
        return self.pi[1][0]

    @property
    def p11(self) -> float:
        return self.pi[1][1]

    @property
    def det(self) -> float:
        return self.p00 * self.p11 - self.p01 * self.p10

    @property
    def standard_regime(self) -> bool:
        return self.det > 0 and min(self.p00, self.p01, self.p10, self.p11) > 0 and self.epsilon > 0

    @property
    def stationary(self) -> tuple[float, float]:
        s = self.p01 + self.p10
        return self.p10 / s, self.p01 / s

    @property
    def x0(self) -> float:
        return self.p10 / self.p01

    def output_mix(self) -> tuple[float, float]:
        """``(alpha, beta)`` with ``r0(x) = (alpha x + beta) / (x + 1)``."""
        e = self.epsilon
        return (1 - e) * self.p00 + e * self.p01, (1 - e) * self.p10 + e * self.p11

    def gains(self) -> tuple[float, float]:
        e = self.epsilon
        return (1 - e) / e, e / (1 - e)


def require_standard(p: BinaryChainParams):
    if not p.standard_regime:
        raise RegimeViolation(
            f"needs det(pi) > 0, all pi_ij > 0 and eps > 0 (det={p.det:.3g}, eps={p.epsilon:g})"
        )


def build_model(p: BinaryChainParams) -> HiddenMarkovModel:
    """The 4-state (y, e) chain with output y xor e."""
    return ModelCurve.bsc(p.pi).model_at(p.epsilon)


def bsc_curve(p: BinaryChainParams) -> ModelCurve:
    return ModelCurve.bsc(p.pi)


def _check_state(x):
    x = x if np.isscalar(x) else np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise NegativeState("likelihood ratio must be nonnegative")
    return x


def r0(p: BinaryChainParams, x):
    """Probability that the next output is 0 given likelihood ratio ``x``."""
    x = _check_state(x)
    alpha, beta = p.output_mix()
    return (alpha * x + beta) / (x + 1)


def r1(p: BinaryChainParams, x):
    x = _check_state(x)
    e = p.epsilon
    gamma = e * p.p00 + (1 - e) * p.p01
    delta = e * p.p10 + (1 - e) * p.p11
    return (gamma * x + delta) / (x + 1)


def binary_entropy(q):
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -(np.where(q > 0, q * np.log(q), 0.0) + np.where(q < 1, (1 - q) * np.log1p(-q), 0.0))
    return out if out.ndim else float(out)


def r_entropy(p: BinaryChainParams, x):
    """``r(x) = -(r0 log r0 + r1 log r1)``, the next-symbol entropy at state ``x``."""
    return binary_entropy(r0(p, x))


def mobius(p: BinaryChainParams, x):
    return (p.p00 * x + p.p10) / (p.p01 * x + p.p11)


def f_map(p: BinaryChainParams, z: int, x):
    if p.epsilon <= 0:
        raise RegimeViolation("the maps are undefined at eps = 0")
    c0, c1 = p.gains()
    return (c0 if z == 0 else c1) * mobius(p, x)


def f_map_dx(p: BinaryChainParams, z: int, x):
    c0, c1 = p.gains()
    return (c0 if z == 0 else c1) * p.det / (p.p01 * x + p.p11) ** 2


def f_map_deps(p: BinaryChainParams, z: int, x):
    e = p.epsilon
    dc = -1.0 / e**2 if z == 0 else 1.0 / (1 - e) ** 2
    return dc * mobius(p, x)


def _positive_root(a: float, b: float, c: float) -> float:
    """Positive root of ``a x^2 + b x + c`` with ``a > 0`` and ``c <= 0``, cancellation-free."""
    disc = math.sqrt(b * b - 4 * a * c)
    if b >= 0:
        return (-2 * c) / (b + disc) if (b + disc) > 0 else 0.0
    return (-b + disc) / (2 * a)


def fixed_points(p: BinaryChainParams, allow_degenerate: bool = False) -> tuple[float, float]:
    """Positive fixed points ``(p1, p0)`` of ``f_1`` and ``f_0``.

    ``f_z(x) = x`` is the quadratic ``pi01 x^2 + (pi11 - c pi00) x - c pi10 = 0``.
    """
    if not p.standard_regime:
        ok = allow_degenerate and abs(p.det) <= 1e-12 and p.epsilon > 0 and p.p01 > 0
        if not ok:
            require_standard(p)
    out = []
    for z, c in zip((1, 0), reversed(p.gains())):
        x = _positive_root(p.p01, p.p11 - c * p.p00, -c * p.p10)
        # one Newton polish on f(x) - x
        resid = f_map(p, z, x) - x
        slope = f_map_dx(p, z, x) - 1.0
        if slope != 0:
            x = x - resid / slope
        out.append(x)
    return out[0], out[1]


class SupportKind(enum.Enum):
    CANTOR = "CantorSet"
    INTERVAL = "Interval"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class SupportClass:
    kind: SupportKind
    p0: float
    p1: float
    f1_p0: float
    f0_p1: float
    boundary: bool

    @property
    def interval(self) -> tuple[float, float]:
        return self.p1, self.p0

    @property
    def gap(self) -> float:
        """``f0(p1) - f1(p0)``; positive exactly in the non-overlapping case."""
        return self.f0_p1 - self.f1_p0

    @property
    def non_overlapping(self) -> bool:
        return self.kind is SupportKind.CANTOR

    def to_dict(self) -> dict:
        return {
            "class": self.kind.value,
            "boundary": self.boundary,
            "p0": self.p0,
            "p1": self.p1,
            "f1_p0": self.f1_p0,
            "f0_p1": self.f0_p1,
            "gap": self.gap,
            "interval": [self.p1, self.p0],
        }


def classify_support(p: BinaryChainParams) -> SupportClass:
    """Cantor set iff ``f1(p0) < f0(p1)``; a band of ``BOUNDARY_TOL`` is the overlapping boundary.

    Independent rows (``det(pi) = 0``, other standing assumptions intact) give a
    two-point support and are reported as ``Degenerate``.
    """
    if abs(p.det) <= 1e-12 and p.epsilon > 0 and min(p.p00, p.p01, p.p10, p.p11) > 0:
        p1, p0 = fixed_points(p, allow_degenerate=True)
        return SupportClass(SupportKind.DEGENERATE, p0, p1, f_map(p, 1, p0), f_map(p, 0, p1), False)
    require_standard(p)
    p1, p0 = fixed_points(p)
    f1p0, f0p1 = float(f_map(p, 1, p0)), float(f_map(p, 0, p1))
    gap = f0p1 - f1p0
    if abs(gap) <= BOUNDARY_TOL:
        return SupportClass(SupportKind.INTERVAL, p0, p1, f1p0, f0p1, True)
    kind = SupportKind.CANTOR if gap > 0 else SupportKind.INTERVAL
    return SupportClass(kind, p0, p1, f1p0, f0p1, False)


def _require_non_overlapping(p: BinaryChainParams) -> SupportClass:
    sc = classify_support(p)
    if not sc.non_overlapping:
        raise NotNonOverlapping(f"f1(p0) = {sc.f1_p0:.6g} is not below f0(p1) = {sc.f0_p1:.6g}")
    return sc


def _guard_level(count: int):
    if count > LEVEL_GUARD:
        raise EnumerationTooLarge(f"{count} cylinders exceeds the guard of {LEVEL_GUARD}")


def _iterate(p: BinaryChainParams, start: np.ndarray, n: int) -> np.ndarray:
    """Apply all words of length ``n`` to each start value; shape ``(len(start) * 2**n,)``.

    Index ``s * 2**n + code(w)``, i.e. lexicographic within each start value.
    """
    c0, c1 = p.gains()
    x = np.asarray(start, dtype=float).reshape(-1, 1)
    for _ in range(n):
        m = mobius(p, x)
        x = np.stack([c0 * m, c1 * m], axis=-1).reshape(x.shape[0], -1)
    return x.reshape(-1)


def support_points(p: BinaryChainParams, n: int) -> np.ndarray:
    """All n-fold images of ``p0`` and ``p1``, sorted and de-duplicated."""
    require_standard(p)
    _guard_level(2 ** (n + 1))
    p1, p0 = fixed_points(p)
    pts = np.sort(_iterate(p, np.array([p1, p0]), n))
    keep = np.concatenate([[True], np.diff(pts) > DEDUP_TOL])
    return pts[keep]


@dataclass(frozen=True)
class CylinderLevel:
    """Level-n approximation of Blackwell's measure, sorted by point.

    ``words[i]`` is the integer code of the word whose point is ``points[i]``;
    ``lo``/``hi`` bound its cylinder interval.
    """

    level: int
    words: np.ndarray
    points: np.ndarray
    probs: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def word_string(self, i: int) -> str:
        return format(int(self.words[i]), f"0{self.level}b") if self.level else ""

    def mass_in(self, lo: float, hi: float, rtol: float = MASS_RTOL) -> float:
        """Mass of the points in ``[lo, hi]``, endpoints widened by ``rtol`` relative.

        Points whose words end in a long run of one symbol converge onto a
        fixed point, and rounding can leave them an ulp outside an interval
        that ends exactly there.
        """
        sel = (self.points >= lo - rtol * abs(lo)) & (self.points <= hi + rtol * abs(hi))
        return math.fsum(self.probs[sel].tolist())


def word_codes(n: int) -> np.ndarray:
    return np.arange(2**n, dtype=np.int64)


def _word_probs(p: BinaryChainParams, n: int) -> np.ndarray:
    """``p(z_1^n)`` for all words in lexicographic order via the (a, b) recursion."""
    e = p.epsilon
    a0, b0 = p.stationary
    a = np.array([a0])
    b = np.array([b0])
    for _ in range(n):
        ta = p.p00 * a + p.p10 * b
        tb = p.p01 * a + p.p11 * b
        a = np.stack([(1 - e) * ta, e * ta], axis=-1).reshape(-1)
        b = np.stack([e * tb, (1 - e) * tb], axis=-1).reshape(-1)
    return a + b


def cylinder_level(p: BinaryChainParams, n: int) -> CylinderLevel:
    require_standard(p)
    _guard_level(2**n)
    p1, p0 = fixed_points(p)
    x = _iterate(p, np.array([p.x0]), n)
    lo = _iterate(p, np.array([p1]), n)
    hi = _iterate(p, np.array([p0]), n)
    probs = _word_probs(p, n)
    order = np.argsort(x, kind="stable")
    return CylinderLevel(n, word_codes(n)[order], x[order], probs[order], lo[order], hi[order])


def r_extrema(p: BinaryChainParams, lo, hi) -> tuple[np.ndarray, np.ndarray]:
    """Min and max of ``r`` over each ``[lo, hi]``.

    ``r0`` is monotone in ``x`` and the binary entropy is unimodal in ``r0``, so
    the only interior critical point is where ``r0 = 1/2``, which has the
    closed form ``x* = (1/2 - beta) / (alpha - 1/2)``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    r_lo, r_hi = r_entropy(p, lo), r_entropy(p, hi)
    rmin = np.minimum(r_lo, r_hi)
    rmax = np.maximum(r_lo, r_hi)
    alpha, beta = p.output_mix()
    if alpha != 0.5:
        xstar = (0.5 - beta) / (alpha - 0.5)
        inside = (lo <= xstar) & (xstar <= hi)
        rmax = np.where(inside, LOG2, rmax)
    else:
        rmax = np.where(beta == 0.5, LOG2, rmax)
    return rmin, rmax


@dataclass(frozen=True)
class EntropyBounds:
    level: int
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def entropy_bounds(p: BinaryChainParams, n: int) -> EntropyBounds:
    """Cylinder bounds ``sum p_w min_{I_w} r <= H(Z) <= sum p_w max_{I_w} r``."""
    _require_non_overlapping(p)
    cyl = cylinder_level(p, n)
    rmin, rmax = r_extrema(p, cyl.lo, cyl.hi)
    lower = math.fsum((cyl.probs * rmin).tolist())
    upper = math.fsum((cyl.probs * rmax).tolist())
    return EntropyBounds(n, lower, upper)


def blackwell_entropy(p: BinaryChainParams, n: int) -> float:
    """``sum_i p_{n,i} r(x_{n,i})``: the level-n quadrature of the Blackwell integral."""
    require_standard(p)
    _guard_level(2**n)
    x = _iterate(p, np.array([p.x0]), n)
    probs = _word_probs(p, n)
    return math.fsum((probs * r_entropy(p, x)).tolist())


@dataclass(frozen=True)
class DeletedInterval:
    level: int
    word: str
    lo: float
    hi: float

    @property
    def length(self) -> float:
        return self.hi - self.lo


def deleted_intervals(p: BinaryChainParams, n: int) -> list[DeletedInterval]:
    """Images ``F_w((f1(p0), f0(p1)))`` for all words ``w`` of length ``0..n``."""
    sc = _require_non_overlapping(p)
    _guard_level(2 ** (n + 1))
    out = []
    for k in range(n + 1):
        lo = _iterate(p, np.array([sc.f1_p0]), k)
        hi = _iterate(p, np.array([sc.f0_p1]), k)
        for code in range(2**k):
            word = format(code, f"0{k}b") if k else ""
            out.append(DeletedInterval(k, word, float(lo[code]), float(hi[code])))
    return out


def max_output_probability(p: BinaryChainParams) -> float:
    """``xi = max over I of max(r0, r1)``; both are monotone so the endpoints suffice."""
    p1, p0 = fixed_points(p)
    ends = np.array([p1, p0])
    return float(max(r0(p, ends).max(), r1(p, ends).max()))
