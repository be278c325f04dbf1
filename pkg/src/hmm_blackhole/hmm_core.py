"""Hidden Markov chain data model.

A hidden Markov chain is a Markov chain ``Y`` on states ``0..B-1`` with
transition matrix ``delta`` observed through a deterministic symbol map
``phi: {0..B-1} -> {0..A-1}``.  ``delta_a`` keeps the columns of ``delta``
whose state emits ``a`` and zeroes the rest, so that ``sum_a delta_a == delta``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    ModelError,
    NotIrreducible,
    SymbolOutOfRange,
    ZeroProbabilitySymbol,
)

ROW_SUM_TOL = 1e-12


def as_stochastic(matrix, tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Validate a square row-stochastic matrix and return a read-only copy."""
    m = np.array(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ModelError(f"transition matrix must be square and non-empty, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        i, j = np.argwhere(~np.isfinite(m))[0]
        raise ModelError(f"non-finite entry at row {i}, column {j}")
    neg = np.argwhere(m < 0)
    if len(neg):
        i, j = neg[0]
        raise ModelError(f"negative entry {m[i, j]!r} at row {i}, column {j}")
    sums = m.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if len(bad):
        i = bad[0]
        raise ModelError(f"row {i} sums to {sums[i]!r}, expected 1")
    m.setflags(write=False)
    return m


def as_belief(w, n_states: int | None = None, tol: float = ROW_SUM_TOL) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or (n_states is not None and len(w) != n_states):
        raise ModelError(f"belief state must be a vector of length {n_states}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > tol:
        raise ModelError("belief state must be a probability vector")
    return w


@dataclass(frozen=True)
class HiddenMarkovModel:
    delta: np.ndarray
    phi: tuple[int, ...]
    n_symbols: int = field(default=-1)

    def __post_init__(self):
        delta = as_stochastic(self.delta)
        phi = tuple(int(v) for v in self.phi)
        n_symbols = self.n_symbols if self.n_symbols > 0 else (max(phi) + 1 if phi else 0)
        if len(phi) != delta.shape[0]:
            raise ModelError(f"phi has length {len(phi)} but delta has {delta.shape[0]} states")
        for state, a in enumerate(phi):
            if not 0 <= a < n_symbols:
                raise ModelError(f"phi[{state}] = {a} outside 0..{n_symbols - 1}")
        missing = sorted(set(range(n_symbols)) - set(phi))
        if missing:
            raise ModelError(f"symbols {missing} are emitted by no state")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "n_symbols", n_symbols)

    @property
    def n_states(self) -> int:
        return self.delta.shape[0]

    @classmethod
    def from_dict(cls, data: dict) -> "HiddenMarkovModel":
        try:
            return cls(np.asarray(data["delta"], dtype=float), tuple(data["phi"]))
        except KeyError as exc:
            raise ModelError(f"model file is missing key {exc}") from None

    @classmethod
    def from_json(cls, path) -> "HiddenMarkovModel":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"delta": self.delta.tolist(), "phi": list(self.phi)}


def _matrix_of(m) -> np.ndarray:
    return m.delta if isinstance(m, HiddenMarkovModel) else as_stochastic(m)


def _closed_classes(m: np.ndarray) -> list[np.ndarray]:
    n_comp, labels = connected_components(m > 0, directed=True, connection="strong")
    closed = []
    for c in range(n_comp):
        members = labels == c
        # a class is closed when no positive entry leaves it
        if not np.any(m[np.ix_(members, ~members)] > 0):
            closed.append(np.flatnonzero(members))
    return closed


def is_irreducible(m) -> bool:
    m = _matrix_of(m)
    n_comp, _ = connected_components(m > 0, directed=True, connection="strong")
    return n_comp == 1


def stationary_distribution(m) -> np.ndarray:
    """Unique stationary vector of ``m`` (``pi @ m == pi``, ``sum(pi) == 1``).

    Transient states are allowed and receive probability exactly zero; the
    chain must have a single closed class, otherwise the stationary vector is
    not unique and ``NotIrreducible`` is raised.
    """
    m = _matrix_of(m)
    closed = _closed_classes(m)
    if len(closed) != 1:
        raise NotIrreducible(f"chain has {len(closed)} closed classes; stationary vector is not unique")
    b = m.shape[0]
    system = np.vstack([m.T - np.eye(b), np.ones(b)])
    rhs = np.zeros(b + 1)
    rhs[-1] = 1.0
    pi = np.linalg.lstsq(system, rhs, rcond=None)[0]
    recurrent = np.zeros(b, dtype=bool)
    recurrent[closed[0]] = True
    pi[~recurrent] = 0.0
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def symbol_matrix(m: HiddenMarkovModel, a: int) -> np.ndarray:
    if not 0 <= a < m.n_symbols:
        raise SymbolOutOfRange(f"symbol {a} outside 0..{m.n_symbols - 1}")
    keep = np.asarray(m.phi) == a
    return np.where(keep[None, :], m.delta, 0.0)


def symbol_matrices(m: HiddenMarkovModel) -> np.ndarray:
    """All symbol matrices stacked as an ``(A, B, B)`` array."""
    return np.stack([symbol_matrix(m, a) for a in range(m.n_symbols)])


def r_a(m: HiddenMarkovModel, a: int, w) -> float:
    """Probability of emitting ``a`` next from belief ``w``."""
    w = as_belief(w, m.n_states)
    return float(w @ symbol_matrix(m, a) @ np.ones(m.n_states))


def f_a(m: HiddenMarkovModel, a: int, w) -> np.ndarray:
    """Belief update after observing ``a``."""
    w = as_belief(w, m.n_states)
    v = w @ symbol_matrix(m, a)
    total = v.sum()
    if total <= 0:
        raise ZeroProbabilitySymbol(f"symbol {a} has zero probability from this belief state")
    return v / total


@dataclass(frozen=True)
class SymbolRankReport:
    symbol: int
    singular_ratio: float
    proportionality_residual: float
    column_classes: tuple[str, ...]
    rank_one: bool
    columns_ok: bool


@dataclass(frozen=True)
class BlackHoleReport:
    is_black_hole: bool
    tol: float
    symbols: tuple[SymbolRankReport, ...]

    def __bool__(self) -> bool:
        return self.is_black_hole

    def summary(self) -> str:
        lines = [f"black hole: {self.is_black_hole} (tol {self.tol:g})"]
        for s in self.symbols:
            lines.append(
                f"  symbol {s.symbol}: rank_one={s.rank_one} sv_ratio={s.singular_ratio:.3e} "
                f"residual={s.proportionality_residual:.3e} columns={','.join(s.column_classes)}"
            )
        return "\n".join(lines)


def _column_class(col: np.ndarray) -> str:
    if np.all(col == 0):
        return "zero"
    if np.all(col > 0):
        return "positive"
    return "mixed"


def is_black_hole(m: HiddenMarkovModel, tol: float = 1e-12) -> BlackHoleReport:
    """Check that every symbol matrix is rank one with positive-or-zero columns.

    Rank one means the second singular value is below ``tol`` times the first
    and every nonzero column is proportional to the largest one (relative
    residual below ``tol``).  Zero columns must be exactly zero.
    """
    reports = []
    for a in range(m.n_symbols):
        d = symbol_matrix(m, a)
        classes = tuple(_column_class(d[:, j]) for j in range(d.shape[1]))
        sv = np.linalg.svd(d, compute_uv=False)
        ratio = float(sv[1] / sv[0]) if sv[0] > 0 and len(sv) > 1 else (0.0 if sv[0] > 0 else np.inf)
        norms = np.linalg.norm(d, axis=0)
        residual = 0.0
        if norms.max() > 0:
            ref = d[:, np.argmax(norms)] / norms.max()
            for j in np.flatnonzero(norms > 0):
                col = d[:, j]
                perp = col - (col @ ref) * ref
                residual = max(residual, float(np.linalg.norm(perp) / norms[j]))
        else:
            residual = np.inf
        rank_one = ratio < tol and residual < tol
        columns_ok = "mixed" not in classes
        reports.append(SymbolRankReport(a, ratio, residual, classes, rank_one, columns_ok))
    ok = all(r.rank_one and r.columns_ok for r in reports)
    return BlackHoleReport(ok, tol, tuple(reports))


def reverse_model(m: HiddenMarkovModel) -> HiddenMarkovModel:
    """Time-reversed chain ``diag(1/pi) delta^T diag(pi)`` with the same symbol map."""
    if not is_irreducible(m):
        raise NotIrreducible("reversal needs an irreducible chain")
    pi = stationary_distribution(m)
    rev = (m.delta.T * pi[None, :]) / pi[:, None]
    rev = rev / rev.sum(axis=1, keepdims=True)
    return HiddenMarkovModel(rev, m.phi, m.n_symbols)


def permute_states(m: HiddenMarkovModel, perm) -> HiddenMarkovModel:
    """Relabel states: new state ``i`` is old state ``perm[i]``."""
    perm = np.asarray(perm)
    return HiddenMarkovModel(m.delta[np.ix_(perm, perm)], tuple(m.phi[p] for p in perm), m.n_symbols)
