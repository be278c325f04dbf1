"""First-derivative decomposition over Blackwell's measure and special cases.

For the level-n measure ``Q_n`` (points ``x_{n,i}`` with masses ``p_{n,i}``)
``H_n = int r dQ_n``.  Splitting its eps-derivative into a boundary term,
a location-change sum and two integrals over ``I = [p1, p0]`` gives

    H_n' = dr/deps(eps, p0) + sum_i p_i x_i' g(x_i)
           - int_I F_n' g dx - int_I F_n dg/deps dx

with ``g = dr/dx``.  The first term is the partial derivative in eps at the
fixed location ``p0``; moving the endpoint contributes nothing because
``F_n = 1`` at ``p0`` and ``F_n = 0`` at ``p1`` cancel it inside the integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bsc import (
    BinaryChainParams,
    _require_non_overlapping,
    _guard_level,
    binary_entropy,
    build_model,
    cylinder_level,
    bsc_curve,
    f_map_deps,
    f_map_dx,
    fixed_points,
    mobius,
    require_standard,
)
from .entropy import h_n
from .errors import DomainError, ModelError, NotRankOne, QuadratureTooCoarse

SNAP_OFFSET = 1e-12
QUAD_TOL = 5e-3


def _mix_and_slopes(p: BinaryChainParams):
    e = p.epsilon
    alpha = (1 - e) * p.p00 + e * p.p01
    beta = (1 - e) * p.p10 + e * p.p11
    return alpha, beta, p.p01 - p.p00, p.p11 - p.p10


def _r0_parts(p: BinaryChainParams, x):
    x = np.asarray(x, dtype=float)
    alpha, beta, da, db = _mix_and_slopes(p)
    q = (alpha * x + beta) / (x + 1)
    q_x = (alpha - beta) / (x + 1) ** 2
    q_e = (da * x + db) / (x + 1)
    q_xe = (da - db) / (x + 1) ** 2
    return q, q_x, q_e, q_xe


def r_function(p: BinaryChainParams, x):
    return binary_entropy(_r0_parts(p, x)[0])


def r_eps_derivative(p: BinaryChainParams, x):
    """Partial derivative of ``r(eps, x)`` in eps at fixed ``x``."""
    q, _, q_e, _ = _r0_parts(p, x)
    return np.log((1 - q) / q) * q_e


def g_function(p: BinaryChainParams, x):
    """``g = dr/dx = r0_x log(r1 / r0)``."""
    q, q_x, _, _ = _r0_parts(p, x)
    return np.log((1 - q) / q) * q_x


def g_eps_derivative(p: BinaryChainParams, x):
    """``dg/deps`` at fixed ``x``."""
    q, q_x, q_e, q_xe = _r0_parts(p, x)
    dlog = -q_e * (1 / (1 - q) + 1 / q)
    return q_xe * np.log((1 - q) / q) + q_x * dlog


@dataclass(frozen=True)
class LevelJets:
    """Level-n points with eps-derivatives, sorted by location.

    ``dx`` are location changes, ``dp`` probability changes; ``words`` are the
    lexicographic integer codes.
    """

    level: int
    words: np.ndarray
    x: np.ndarray
    dx: np.ndarray
    p: np.ndarray
    dp: np.ndarray


def _raw_level_jets(p: BinaryChainParams, n: int, x0=None):
    """Unsorted first-order jets of points and word probabilities, lexicographic order."""
    e = p.epsilon
    c0, c1 = p.gains()
    dc0, dc1 = -1.0 / e**2, 1.0 / (1 - e) ** 2
    x = np.array([p.x0 if x0 is None else x0])
    dx = np.zeros(1)
    a0, b0 = p.stationary
    a, b = np.array([a0]), np.array([b0])
    da, db = np.zeros(1), np.zeros(1)
    for _ in range(n):
        m = mobius(p, x)
        m_x = p.det / (p.p01 * x + p.p11) ** 2
        x_new = np.stack([c0 * m, c1 * m], axis=-1).reshape(-1)
        dx_new = np.stack([dc0 * m + c0 * m_x * dx, dc1 * m + c1 * m_x * dx], axis=-1).reshape(-1)
        ta = p.p00 * a + p.p10 * b
        tb = p.p01 * a + p.p11 * b
        dta = p.p00 * da + p.p10 * db
        dtb = p.p01 * da + p.p11 * db
        a_new = np.stack([(1 - e) * ta, e * ta], axis=-1).reshape(-1)
        b_new = np.stack([e * tb, (1 - e) * tb], axis=-1).reshape(-1)
        da_new = np.stack([-ta + (1 - e) * dta, ta + e * dta], axis=-1).reshape(-1)
        db_new = np.stack([tb + e * dtb, -tb + (1 - e) * dtb], axis=-1).reshape(-1)
        x, dx, a, b, da, db = x_new, dx_new, a_new, b_new, da_new, db_new
    return x, dx, a + b, da + db


def level_jets(p: BinaryChainParams, n: int) -> LevelJets:
    _require_non_overlapping(p)
    _guard_level(2**n)
    x, dx, prob, dprob = _raw_level_jets(p, n)
    order = np.argsort(x, kind="stable")
    codes = np.arange(2**n, dtype=np.int64)
    return LevelJets(n, codes[order], x[order], dx[order], prob[order], dprob[order])


def location_jets(p: BinaryChainParams, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted cylinder points and their eps-derivatives."""
    lj = level_jets(p, n)
    return lj.x, lj.dx


def location_jets_from(p: BinaryChainParams, words, start: float) -> tuple[np.ndarray, np.ndarray]:
    """Points and eps-derivatives for explicit words started at ``start`` (with zero derivative)."""
    e = p.epsilon
    c = p.gains()
    dc = (-1.0 / e**2, 1.0 / (1 - e) ** 2)
    xs, dxs = [], []
    for w in words:
        x, dx = float(start), 0.0
        for z in w:
            z = int(z)
            m = float(mobius(p, x))
            m_x = p.det / (p.p01 * x + p.p11) ** 2
            x, dx = c[z] * m, dc[z] * m + c[z] * m_x * dx
        xs.append(x)
        dxs.append(dx)
    return np.array(xs), np.array(dxs)


def location_bound(p: BinaryChainParams, block: int = 1, samples: int = 2049) -> float:
    """Geometric-series bound on ``|x'|`` over all words.

    Uses ``block``-fold compositions ``G_w``: with ``S = sup |dG_w/deps|`` and
    ``rho = sup |dG_w/dx|`` over ``I`` (``rho < 1`` is required), every
    location derivative obeys ``|x'| <= max(B, S / (1 - rho))`` where ``B``
    bounds the transient words shorter than ``block``.  ``dG_w/dx`` is
    largest at ``p1``; ``S`` is taken over a grid of ``samples`` points.
    """
    p1, p0 = fixed_points(p)
    grid = np.linspace(p1, p0, samples)
    x, dx, _, _ = _raw_level_jets(p, block, x0=grid[0])
    rho = 0.0
    # derivative of G_w in x at p1: chain of f' along the orbit of p1
    for code in range(2**block):
        word = [int(c) for c in format(code, f"0{block}b")]
        slope, y = 1.0, p1
        for z in word:
            slope *= float(f_map_dx(p, z, y))
            y = float(p.gains()[z] * mobius(p, y))
        rho = max(rho, slope)
    if rho >= 1:
        raise ValueError(f"{block}-fold compositions are not contractions (rho = {rho:.3g})")
    s = 0.0
    words = [[int(c) for c in format(code, f"0{block}b")] for code in range(2**block)]
    for start in grid:
        _, d = location_jets_from(p, words, start)
        s = max(s, float(np.abs(d).max()))
    transient = 0.0
    for k in range(block):
        _, d, _, _ = _raw_level_jets(p, k)
        transient = max(transient, float(np.abs(d).max()))
    return max(transient, s / (1 - rho))


@dataclass(frozen=True)
class CdfJets:
    """Step data of ``F_n`` and ``F_n'``: values on ``[points[i], points[i+1])``."""

    level: int
    points: np.ndarray
    cdf: np.ndarray
    dcdf: np.ndarray

    def evaluate(self, x) -> tuple[np.ndarray, np.ndarray]:
        idx = np.searchsorted(self.points, np.asarray(x, dtype=float), side="right") - 1
        f = np.where(idx >= 0, self.cdf[np.clip(idx, 0, None)], 0.0)
        df = np.where(idx >= 0, self.dcdf[np.clip(idx, 0, None)], 0.0)
        return f, df


def probability_cdf_jets(p: BinaryChainParams, n: int) -> CdfJets:
    lj = level_jets(p, n)
    return CdfJets(n, lj.x, np.cumsum(lj.p), np.cumsum(lj.dp))


def p0_derivative(p: BinaryChainParams) -> float:
    """``dp0/deps = (df0/deps) / (1 - df0/dx)`` at the attracting fixed point."""
    _, p0 = fixed_points(p)
    return float(f_map_deps(p, 0, p0) / (1 - f_map_dx(p, 0, p0)))


@dataclass(frozen=True)
class HpzBreakdown:
    term1: float
    term2: float
    term3: float
    term4: float
    level: int
    p0_prime: float
    term1_total_derivative: float
    quadrature: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.term1 + self.term2 + self.term3 + self.term4

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "term1": self.term1,
            "term2": self.term2,
            "term3": self.term3,
            "term4": self.term4,
            "total": self.total,
            "p0_prime": self.p0_prime,
            "term1_total_derivative": self.term1_total_derivative,
            "quadrature": self.quadrature,
        }


def _exact_integrals(p: BinaryChainParams, lj: LevelJets, p1: float, p0: float):
    """Integrals of step functions against ``g`` and ``dg/deps`` via their antiderivatives."""
    edges = np.concatenate([lj.x, [p0]])
    cdf = np.cumsum(lj.p)
    dcdf = np.cumsum(lj.dp)
    r_at = r_function(p, edges)
    re_at = r_eps_derivative(p, edges)
    int_dF_g = math.fsum((dcdf * np.diff(r_at)).tolist())
    int_F_ge = math.fsum((cdf * np.diff(re_at)).tolist())
    return int_dF_g, int_F_ge


def _simpson(values: np.ndarray, h: float) -> float:
    w = np.ones(len(values))
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return math.fsum((w * values).tolist()) * h / 3


def simpson_jump_bound(p: BinaryChainParams, lj: LevelJets, nodes: int) -> float:
    """A-priori error bound for Simpson on the step functions ``F_n`` and ``F_n'``.

    A jump of size ``J`` inside a cell of width ``h`` costs at most about
    ``(4/3) J h sup|integrand factor|``; summing over all jumps gives the bound.
    """
    p1, p0 = fixed_points(p)
    h = (p0 - p1) / (nodes - 1)
    per_jump = lj.p * np.abs(g_eps_derivative(p, lj.x)) + np.abs(lj.dp) * np.abs(g_function(p, lj.x))
    return 4.0 / 3.0 * h * math.fsum(per_jump.tolist())


def _simpson_integrals(p: BinaryChainParams, lj: LevelJets, p1: float, p0: float, nodes: int, tol: float):
    """Composite Simpson for the two integrals on ``nodes`` uniform nodes over ``I``.

    ``F_n`` jumps at every cylinder point and the points crowd towards ``p1``,
    so no uniform grid separates them all.  Instead the grid is refused when
    the summed jump error bound exceeds ``tol``.
    """
    if nodes < 3 or nodes % 2 == 0:
        raise QuadratureTooCoarse(f"Simpson needs an odd node count >= 3, got {nodes}")
    bound = simpson_jump_bound(p, lj, nodes)
    if bound > tol:
        raise QuadratureTooCoarse(
            f"jump error bound {bound:.3g} exceeds {tol:.3g} with {nodes} nodes; use more nodes or method='exact'"
        )
    h = (p0 - p1) / (nodes - 1)
    x = np.linspace(p1, p0, nodes)
    # nodes sitting on a jump are moved off it so F_n is unambiguous there
    idx = np.clip(np.searchsorted(lj.x, x), 1, max(len(lj.x) - 1, 1))
    nearest = np.minimum(np.abs(x - lj.x[np.minimum(idx, len(lj.x) - 1)]), np.abs(x - lj.x[idx - 1]))
    x = np.where(nearest < SNAP_OFFSET, x + SNAP_OFFSET, x)
    cdf = CdfJets(lj.level, lj.x, np.cumsum(lj.p), np.cumsum(lj.dp))
    f, df = cdf.evaluate(x)
    i3 = _simpson(df * g_function(p, x), h)
    i4 = _simpson(f * g_eps_derivative(p, x), h)
    return i3, i4, bound


def hpz_derivative(p: BinaryChainParams, n: int = 12, quad_points: int = 4097, method: str = "simpson", quad_tol: float = QUAD_TOL
) -> HpzBreakdown:
    """Four-term decomposition of ``dH_n/deps`` in the non-overlapping case.

    ``method='simpson'`` integrates terms 3 and 4 by composite Simpson on
    ``quad_points`` uniform nodes over ``I``.  ``method='exact'`` integrates
    the piecewise-constant ``F_n`` and ``F_n'`` against the closed-form
    antiderivatives ``r`` and ``dr/deps``, which makes the total equal to the
    eps-derivative of ``H_n`` up to roundoff.
    """
    sc = _require_non_overlapping(p)
    p1, p0 = sc.p1, sc.p0
    lj = level_jets(p, n)
    term1 = float(r_eps_derivative(p, p0))
    term2 = math.fsum((lj.p * lj.dx * g_function(p, lj.x)).tolist())
    if method == "exact":
        i3, i4 = _exact_integrals(p, lj, p1, p0)
        quad = {"method": "exact-piecewise", "segments": int(len(lj.x) + 1)}
    elif method == "simpson":
        i3, i4, bound = _simpson_integrals(p, lj, p1, p0, quad_points, quad_tol)
        quad = {"method": "simpson", "nodes": int(quad_points), "snap_offset": SNAP_OFFSET, "jump_error_bound": bound}
    else:
        raise ValueError(f"unknown method {method!r}")
    p0p = p0_derivative(p)
    total_t1 = term1 + float(g_function(p, p0)) * p0p
    return HpzBreakdown(term1, term2, -i3, -i4, n, p0p, total_t1, quad)


def iid_entropy(p: BinaryChainParams) -> float:
    """Entropy rate when both rows of ``pi`` agree: the output is i.i.d."""
    if abs(p.det) > 1e-12:
        raise NotRankOne(f"det(pi) = {p.det:.3g} is not zero")
    e = p.epsilon
    return float(binary_entropy(p.p00 * (1 - e) + p.p01 * e))


def two_zero_entropy(eps: float) -> float:
    """Entropy rate ``h(eps)`` when two transition probabilities vanish."""
    if not 0 < eps < 1:
        raise DomainError(f"eps = {eps} outside (0, 1)")
    return float(binary_entropy(eps))


@dataclass(frozen=True)
class DivergenceProbe:
    eps: tuple[float, ...]
    slopes: tuple[float, ...]
    ratios: tuple[float, ...]
    fit_slope: float
    fit_intercept: float
    r_squared: float
    level: int


def one_zero_divergence_probe(
    p10: float = 0.5,
    eps_grid=(1e-2, 1e-3, 1e-4, 1e-5),
    n: int = 12,
    rel_step: float = 0.1,
) -> DivergenceProbe:
    """Finite-difference slopes of ``H_n(eps)`` for ``pi00 = 0``.

    The slope grows like ``|log eps|``; the fit is ``slope = a + c |log eps|``
    and ``ratios`` are ``slope / |log eps|``.
    """
    if not 0 < p10 < 1:
        raise ModelError("pi10 must lie strictly between 0 and 1")
    pi = ((0.0, 1.0), (p10, 1 - p10))

    def h(eps):
        return h_n(build_model(BinaryChainParams(pi, eps)), n)

    slopes = []
    for eps in eps_grid:
        step = rel_step * eps
        slopes.append((h(eps + step) - h(eps - step)) / (2 * step))
    logs = np.abs(np.log(np.asarray(eps_grid, dtype=float)))
    s = np.asarray(slopes)
    c, a = np.polyfit(logs, s, 1)
    fitted = a + c * logs
    ss_res = float(np.sum((s - fitted) ** 2))
    ss_tot = float(np.sum((s - s.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DivergenceProbe(tuple(eps_grid), tuple(slopes), tuple(s / logs), float(c), float(a), r2, n)


def low_snr_second_derivative(p: BinaryChainParams) -> float:
    """``H''`` at ``eps = 1/2``: ``-4 ((pi10 - pi01) / (pi10 + pi01))**2``."""
    if min(p.p00, p.p01, p.p10, p.p11) <= 0:
        raise ModelError("all transition probabilities must be positive")
    return -4.0 * ((p.p10 - p.p01) / (p.p10 + p.p01)) ** 2


@dataclass(frozen=True)
class LowSnrCheck:
    level: int
    jet_value: float
    closed_form: float
    first_derivative: float
    value: float

    @property
    def gap(self) -> float:
        return abs(self.jet_value - self.closed_form)


def low_snr_numeric_check(p: BinaryChainParams, n: int) -> LowSnrCheck:
    """Order-2 jet of ``H_n`` at ``eps = 1/2`` against the closed form."""
    closed = low_snr_second_derivative(p)
    jet = h_n(bsc_curve(p), n, at=0.5, order=2)
    return LowSnrCheck(n, jet.derivative(2), closed, jet.derivative(1), jet.value)
