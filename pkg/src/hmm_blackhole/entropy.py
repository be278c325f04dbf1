"""Block and conditional entropies of hidden Markov chains, plain or jet-valued.

Every word probability is ``pi delta_{z1} ... delta_{zn} 1``.  Words are
enumerated in lexicographic order by splitting them into a prefix (forward
row vectors from the stationary start) and a suffix (backward column vectors
ending in the all-ones vector), so one chunk of probabilities is a single
matrix product.  Chunk boundaries depend only on module constants; each chunk
is reduced with ``math.fsum`` and chunk sums are combined in order, so the
result does not depend on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import EnumerationTooLarge, ModelError, NonpositiveConstantTerm, NotABlackHole
from .hmm_core import HiddenMarkovModel, is_black_hole, stationary_distribution
from .jets import DEFAULT_ORDER, Jet, ModelCurve, series_xlogx

ENUMERATION_GUARD = 2**26
SUFFIX_WORDS = 2**12
CHUNK_WORDS = 2**16
THREADS_ENV = "HMM_BLACKHOLE_THREADS"


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def stationary_jet(jet_delta: np.ndarray) -> np.ndarray:
    """Taylor coefficients of the stationary vector of a jet-valued matrix.

    Order by order, ``pi_k (D_0 - I) = -sum_{j<k} pi_j D_{k-j}`` with
    ``sum(pi_k) = 0`` for ``k >= 1``; the normalization row makes the system
    uniquely solvable whenever ``D_0`` has a single closed class.
    """
    k_max, b, _ = jet_delta.shape
    out = np.zeros((k_max, b))
    out[0] = stationary_distribution(jet_delta[0])
    system = np.vstack([jet_delta[0].T - np.eye(b), np.ones(b)])
    for k in range(1, k_max):
        acc = np.zeros(b)
        for j in range(k):
            acc -= out[j] @ jet_delta[k - j]
        rhs = np.concatenate([acc, [0.0]])
        sol, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        out[k] = sol
    return out


@dataclass(frozen=True)
class _Prepared:
    init: np.ndarray  # (K+1, B)
    mats: np.ndarray  # (A, K+1, B, B)
    jet: bool

    @property
    def n_symbols(self) -> int:
        return self.mats.shape[0]

    @property
    def order(self) -> int:
        return self.init.shape[0] - 1


def _prepare(m, at=None, order=None) -> _Prepared:
    if isinstance(m, ModelCurve):
        if at is None:
            raise ModelError("a model curve needs an expansion point 'at'")
        order = DEFAULT_ORDER if order is None else order
        jd = m.jet_matrix(at, order)
        phi = np.asarray(m.phi)
        n_sym = int(phi.max()) + 1
        mats = np.stack([np.where((phi == a)[None, None, :], jd, 0.0) for a in range(n_sym)])
        return _Prepared(stationary_jet(jd), mats, True)
    if isinstance(m, HiddenMarkovModel):
        phi = np.asarray(m.phi)
        mats = np.stack([np.where((phi == a)[None, :], m.delta, 0.0) for a in range(m.n_symbols)])
        init = stationary_distribution(m)[None, :]
        return _Prepared(init, mats[:, None, :, :], False)
    raise TypeError(f"expected HiddenMarkovModel or ModelCurve, got {type(m).__name__}")


def _vec_mat(v: np.ndarray, mat: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    for k in range(v.shape[1]):
        for j in range(k + 1):
            out[:, k] += v[:, j] @ mat[k - j]
    return out


def _mat_vec(mat: np.ndarray, u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    for k in range(u.shape[1]):
        for j in range(k + 1):
            out[:, k] += u[:, k - j] @ mat[j].T
    return out


def _forward(prep: _Prepared, length: int) -> np.ndarray:
    v = prep.init[None]
    for _ in range(length):
        nxt = np.stack([_vec_mat(v, prep.mats[a]) for a in range(prep.n_symbols)], axis=1)
        v = nxt.reshape(-1, *prep.init.shape)
    return v


def _backward(prep: _Prepared, length: int) -> np.ndarray:
    u = np.zeros((1,) + prep.init.shape)
    u[0, 0, :] = 1.0
    for _ in range(length):
        u = np.concatenate([_mat_vec(prep.mats[a], u) for a in range(prep.n_symbols)], axis=0)
    return u


def _pair_probabilities(fwd: np.ndarray, bwd: np.ndarray) -> np.ndarray:
    """Jet probabilities of prefix x suffix words, shape (P*S, K+1), lexicographic."""
    k1 = fwd.shape[1]
    out = np.zeros((fwd.shape[0], bwd.shape[0], k1))
    for k in range(k1):
        for j in range(k + 1):
            out[:, :, k] += fwd[:, j, :] @ bwd[:, k - j, :].T
    return out.reshape(-1, k1)


def _split(n_symbols: int, length: int) -> tuple[int, int]:
    if n_symbols == 1:
        return 0, length
    suffix = min(length, int(math.floor(math.log(SUFFIX_WORDS, n_symbols) + 1e-9)))
    return length - suffix, suffix


def _check_guard(n_symbols: int, length: int):
    if n_symbols**length > ENUMERATION_GUARD:
        raise EnumerationTooLarge(
            f"{n_symbols}^{length} words exceeds the enumeration guard of {ENUMERATION_GUARD}"
        )


def _chunks(prep: _Prepared, length: int):
    """Yield (prefix block, suffix vectors) pairs in lexicographic order."""
    pre_len, suf_len = _split(prep.n_symbols, length)
    fwd = _forward(prep, pre_len)
    bwd = _backward(prep, suf_len)
    rows = max(1, CHUNK_WORDS // bwd.shape[0])
    for start in range(0, fwd.shape[0], rows):
        yield fwd[start : start + rows], bwd


def word_probabilities(m, length: int, at=None, order=None) -> np.ndarray:
    """Probabilities of all words of ``length`` in lexicographic order.

    Shape ``(A**length,)`` for plain models and ``(A**length, K+1)`` for curves.
    """
    prep = _prepare(m, at, order)
    _check_guard(prep.n_symbols, length)
    parts = [_pair_probabilities(f, b) for f, b in _chunks(prep, length)]
    p = np.concatenate(parts, axis=0)
    return p if prep.jet else p[:, 0]


def _as_word(z, n_symbols: int) -> list[int]:
    if isinstance(z, str):
        z = [int(c) for c in z]
    z = [int(a) for a in z]
    for a in z:
        if not 0 <= a < n_symbols:
            raise ModelError(f"symbol {a} outside 0..{n_symbols - 1}")
    return z


def word_probability(m, z, at=None, order=None):
    """Probability of a single word; a ``Jet`` when ``m`` is a ``ModelCurve``."""
    prep = _prepare(m, at, order)
    v = prep.init[None]
    for a in _as_word(z, prep.n_symbols):
        v = _vec_mat(v, prep.mats[a])
    p = v[0].sum(axis=-1)
    return Jet(p) if prep.jet else float(p[0])


def _xlogx_sums(p: np.ndarray) -> list[float]:
    zero = p[:, 0] == 0
    if np.any(zero):
        if np.any(p[zero, 1:] != 0):
            raise NonpositiveConstantTerm("a word has zero probability but nonzero derivatives")
        p = p[~zero]
    if np.any(p[:, 0] < 0):
        raise NonpositiveConstantTerm("negative word probability")
    terms = series_xlogx(p)
    return [math.fsum(terms[:, k].tolist()) for k in range(p.shape[1])]


def _block_sum(prep: _Prepared, length: int) -> np.ndarray:
    """``sum_w p(w) log p(w)`` over words of ``length`` (jet coefficients)."""
    if length == 0:
        return np.zeros(prep.order + 1)
    _check_guard(prep.n_symbols, length)

    def work(chunk):
        f, b = chunk
        return _xlogx_sums(_pair_probabilities(f, b))

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            partials = list(pool.map(work, _chunks(prep, length)))
    else:
        partials = [work(c) for c in _chunks(prep, length)]
    return np.array([math.fsum(col) for col in zip(*partials)])


def block_entropy(m, length: int, at=None, order=None):
    """Joint entropy ``H(Z_1..Z_length)`` in nats."""
    prep = _prepare(m, at, order)
    s = -_block_sum(prep, length)
    return Jet(s) if prep.jet else float(s[0])


def h_n(m, n: int, at=None, order=None):
    """Conditional entropy ``H(Z_0 | Z_{-n}^{-1})`` in nats.

    Computed as the block-entropy difference ``H(Z^{n+1}) - H(Z^n)``; ``n = 0``
    is the marginal entropy.  Returns a ``Jet`` for a ``ModelCurve``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    prep = _prepare(m, at, order)
    _check_guard(prep.n_symbols, n + 1)
    s = _block_sum(prep, n) - _block_sum(prep, n + 1)
    return Jet(s) if prep.jet else float(s[0])


@dataclass(frozen=True)
class EntropySequence:
    """``values[k] = H_k`` for ``k = 0..n`` (nats); ``values[0]`` is the marginal entropy."""

    values: tuple[float, ...]
    model: object = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return len(self.values) - 1


def entropy_sequence(m, n_max: int) -> EntropySequence:
    prep = _prepare(m)
    _check_guard(prep.n_symbols, n_max + 1)
    sums = [_block_sum(prep, L)[0] for L in range(n_max + 2)]
    return EntropySequence(tuple(sums[n] - sums[n + 1] for n in range(n_max + 1)), m)


@dataclass(frozen=True)
class RateEstimate:
    estimate: float
    n_used: int
    gap: float


def entropy_rate_estimate(m, n_max: int = 12, gap_tol: float = 1e-12) -> RateEstimate:
    """Upper estimate ``H_n`` of the entropy rate, stopping once ``H_{n-1} - H_n < gap_tol``."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    prep = _prepare(m)
    _check_guard(prep.n_symbols, n_max + 1)
    s_prev, s_cur = _block_sum(prep, 0)[0], _block_sum(prep, 1)[0]
    h_prev = s_prev - s_cur
    for n in range(1, n_max + 1):
        s_next = _block_sum(prep, n + 1)[0]
        h = s_cur - s_next
        gap = h_prev - h
        if gap < gap_tol or n == n_max:
            return RateEstimate(h, n, gap)
        h_prev, s_cur = h, s_next
    raise AssertionError("unreachable")


def stabilizing_length(order: int) -> int:
    """Shortest conditioning length whose order-N derivative is exact at a black hole."""
    return (order + 2) // 2


@dataclass(frozen=True)
class StabilizedDerivative:
    value: float
    order: int
    at: float
    length: int
    long_length: int
    long_value: float
    pre_length: int | None
    pre_value: float | None
    black_hole: object = field(repr=False, default=None)

    @property
    def consistent(self) -> bool:
        scale = max(1.0, abs(self.value))
        return abs(self.value - self.long_value) <= 1e-9 * scale

    @property
    def pre_differs(self) -> bool | None:
        if self.pre_value is None:
            return None
        return abs(self.pre_value - self.value) > 1e-12 * max(1.0, abs(self.value))


def stabilized_derivative(curve: ModelCurve, at: float, order: int, tol: float = 1e-12) -> StabilizedDerivative:
    """Exact ``order``-th derivative of the entropy rate at a black hole.

    Returns the derivative of ``H_L`` with ``L = ceil((order+1)/2)``, plus the
    derivative at the longer length ``order`` as a consistency check and the
    one at ``L - 1`` as a sharpness probe (recorded, not asserted).
    """
    if order < 1:
        raise ValueError("order 0 is the entropy rate itself; use h_n or entropy_rate_estimate")
    report = is_black_hole(curve.model_at(at), tol)
    if not report:
        raise NotABlackHole(f"model at {at} is not a black hole\n{report.summary()}", report)
    length = stabilizing_length(order)
    value = h_n(curve, length, at, order).derivative(order)
    long_length = max(order, length)
    long_value = value if long_length == length else h_n(curve, long_length, at, order).derivative(order)
    pre_length = length - 1
    pre_value = h_n(curve, pre_length, at, order).derivative(order) if pre_length >= 0 else None
    return StabilizedDerivative(value, order, at, length, long_length, long_value, pre_length, pre_value, report)


def markov_first_derivative(curve: ModelCurve, at: float, assume_markov: bool = True) -> float:
    """``dH_1/d eps`` at ``at``, which is the entropy-rate derivative when Z is Markov there.

    Markovity of the output is the caller's claim; it is not verified.
    """
    if not assume_markov:
        raise ValueError("the first-derivative shortcut only holds when the output process is Markov")
    return h_n(curve, 1, at, order=1).derivative(1)
