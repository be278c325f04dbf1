"""Truncated Taylor arithmetic in one scalar parameter.

Coefficients are stored Taylor-normalized: ``coeffs[k]`` is the k-th
derivative divided by ``k!``.  The ``series_*`` functions work on the last
axis of arbitrary arrays so the entropy code can push whole batches of word
probabilities through the same formulas that back the scalar ``Jet`` class.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DivisionByZeroConstantTerm,
    ModelError,
    NonpositiveConstantTerm,
    OrderMismatch,
)
from .hmm_core import HiddenMarkovModel

DEFAULT_ORDER = 4


def series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    out = np.zeros_like(a)
    n = a.shape[-1]
    # terms are paired as a_j b_{k-j} + a_{k-j} b_j so that swapping a and b
    # gives bit-identical results
    for k in range(n):
        for j in range((k + 1) // 2):
            out[..., k] += a[..., j] * b[..., k - j] + a[..., k - j] * b[..., j]
        if k % 2 == 0:
            out[..., k] += a[..., k // 2] * b[..., k // 2]
    return out


def series_div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    if np.any(b[..., 0] == 0):
        raise DivisionByZeroConstantTerm("divisor has zero constant term")
    out = np.zeros_like(a)
    b0 = b[..., 0]
    for k in range(a.shape[-1]):
        acc = a[..., k].copy()
        for j in range(1, k + 1):
            acc -= b[..., j] * out[..., k - j]
        out[..., k] = acc / b0
    return out


def series_log(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, float)
    if np.any(a[..., 0] <= 0):
        raise NonpositiveConstantTerm("log of a series with nonpositive constant term")
    out = np.zeros_like(a)
    a0 = a[..., 0]
    out[..., 0] = np.log(a0)
    for k in range(1, a.shape[-1]):
        acc = a[..., k].copy()
        for j in range(1, k):
            acc -= (j / k) * out[..., j] * a[..., k - j]
        out[..., k] = acc / a0
    return out


def series_exp(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, float)
    out = np.zeros_like(a)
    out[..., 0] = np.exp(a[..., 0])
    for k in range(1, a.shape[-1]):
        acc = np.zeros_like(a[..., 0])
        for j in range(1, k + 1):
            acc += j * a[..., j] * out[..., k - j]
        out[..., k] = acc / k
    return out


def series_xlogx(a: np.ndarray) -> np.ndarray:
    return series_mul(a, series_log(a))


def series_derivative(a: np.ndarray) -> np.ndarray:
    """Series of d/dt, one order shorter."""
    a = np.asarray(a, float)
    k = np.arange(1, a.shape[-1])
    return a[..., 1:] * k


class Jet:
    """Truncated Taylor series of a scalar in one parameter."""

    __slots__ = ("coeffs",)
    __array_priority__ = 1000  # keep numpy scalars from broadcasting over jets

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=float)
        if c.ndim != 1 or len(c) == 0:
            raise ValueError("jet coefficients must be a non-empty vector")
        self.coeffs = c

    @classmethod
    def constant(cls, value: float, order: int = DEFAULT_ORDER) -> "Jet":
        c = np.zeros(order + 1)
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, at: float, order: int = DEFAULT_ORDER) -> "Jet":
        c = np.zeros(order + 1)
        c[0] = at
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def derivative(self, k: int) -> float:
        if not 0 <= k <= self.order:
            raise ValueError(f"derivative order {k} outside 0..{self.order}")
        return float(math.factorial(k) * self.coeffs[k])

    def derivatives(self) -> np.ndarray:
        return self.coeffs * np.array([math.factorial(k) for k in range(self.order + 1)], float)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Jet):
            if other.order != self.order:
                raise OrderMismatch(f"cannot combine jets of order {self.order} and {other.order}")
            return other.coeffs
        if np.ndim(other) != 0:
            return NotImplemented
        c = np.zeros_like(self.coeffs)
        c[0] = float(other)
        return c

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Jet(self.coeffs + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Jet(self.coeffs - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Jet(o - self.coeffs)

    def __neg__(self):
        return Jet(-self.coeffs)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Jet(series_mul(self.coeffs, o))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Jet(series_div(self.coeffs, o))

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Jet(series_div(o, self.coeffs))

    def __eq__(self, other):
        return isinstance(other, Jet) and np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None

    def log(self) -> "Jet":
        return Jet(series_log(self.coeffs))

    def exp(self) -> "Jet":
        return Jet(series_exp(self.coeffs))

    def xlogx(self) -> "Jet":
        return Jet(series_xlogx(self.coeffs))

    def __repr__(self):
        return f"Jet({self.coeffs.tolist()})"


def jet_add(a: Jet, b: Jet) -> Jet:
    return a + b


def jet_mul(a: Jet, b: Jet) -> Jet:
    return a * b


def jet_div(a: Jet, b: Jet) -> Jet:
    return a / b


def jet_log(a: Jet) -> Jet:
    return a.log()


def jet_exp(a: Jet) -> Jet:
    return a.exp()


def jet_xlogx(a: Jet) -> Jet:
    return a.xlogx()


def _coeffs_of(entry, order: int) -> np.ndarray:
    if isinstance(entry, Jet):
        if entry.order != order:
            raise OrderMismatch(f"curve entry has order {entry.order}, expected {order}")
        return entry.coeffs
    c = np.zeros(order + 1)
    c[0] = float(entry)
    return c


@dataclass(frozen=True)
class ModelCurve:
    """A hidden Markov model whose transition matrix depends on one parameter.

    ``delta_fn`` receives the parameter as a ``Jet`` (or a float) and returns
    the B x B matrix as nested sequences of jets/floats, using only
    arithmetic that ``Jet`` supports.  This is what makes derivatives exact.
    """

    delta_fn: Callable[[object], Sequence[Sequence[object]]]
    phi: tuple[int, ...]
    domain: tuple[float, float] = (-math.inf, math.inf)
    name: str = "curve"

    def _check_domain(self, at: float):
        lo, hi = self.domain
        if not lo <= at <= hi:
            raise ModelError(f"parameter {at} outside curve domain [{lo}, {hi}]")

    def model_at(self, at: float) -> HiddenMarkovModel:
        self._check_domain(at)
        rows = self.delta_fn(float(at))
        return HiddenMarkovModel(np.array(rows, dtype=float), self.phi)

    def jet_matrix(self, at: float, order: int = DEFAULT_ORDER) -> np.ndarray:
        """Taylor coefficients of delta at ``at`` as a ``(order+1, B, B)`` array."""
        self._check_domain(at)
        rows = self.delta_fn(Jet.variable(at, order))
        b = len(rows)
        out = np.zeros((order + 1, b, b))
        for i, row in enumerate(rows):
            if len(row) != b:
                raise ModelError(f"curve row {i} has {len(row)} entries, expected {b}")
            for j, entry in enumerate(row):
                out[:, i, j] = _coeffs_of(entry, order)
        HiddenMarkovModel(out[0], self.phi)
        tails = np.abs(out[1:].sum(axis=2))
        if tails.size and tails.max() > 1e-12:
            raise ModelError("curve derivatives of row sums do not vanish; rows leave the simplex")
        return out

    @classmethod
    def polynomial(cls, coeff_matrices, phi, domain=(-math.inf, math.inf), name="polynomial") -> "ModelCurve":
        """``delta(eps) = sum_k coeff_matrices[k] * eps**k``."""
        mats = [np.asarray(c, dtype=float) for c in coeff_matrices]

        def delta_fn(eps):
            b = mats[0].shape[0]
            rows = []
            for i in range(b):
                row = []
                for j in range(b):
                    acc = 0.0
                    power = 1.0
                    for c in mats:
                        acc = acc + float(c[i, j]) * power
                        power = power * eps
                    row.append(acc)
                rows.append(row)
            return rows

        return cls(delta_fn, tuple(int(v) for v in phi), domain, name)

    @classmethod
    def bsc(cls, pi) -> "ModelCurve":
        """Binary Markov chain ``pi`` through a binary symmetric channel with crossover eps.

        States are (y, e) pairs ordered (0,0), (0,1), (1,0), (1,1); the output
        symbol is y xor e, giving phi = (0, 1, 1, 0).
        """
        pi = np.asarray(pi, dtype=float)
        p00, p01 = float(pi[0, 0]), float(pi[0, 1])
        p10, p11 = float(pi[1, 0]), float(pi[1, 1])

        def delta_fn(eps):
            keep = 1 - eps
            row0 = [p00 * keep, p00 * eps, p01 * keep, p01 * eps]
            row1 = [p10 * keep, p10 * eps, p11 * keep, p11 * eps]
            return [row0, list(row0), row1, list(row1)]

        return cls(delta_fn, (0, 1, 1, 0), (0.0, 1.0), "bsc")

    @classmethod
    def from_dict(cls, data: dict) -> "ModelCurve":
        family = data.get("family")
        if family == "bsc" or (family is None and "pi" in data):
            pi = np.asarray(data["pi"], dtype=float)
            if pi.shape == (4,):
                pi = pi.reshape(2, 2)
            return cls.bsc(pi)
        if "delta_coeffs" in data:
            return cls.polynomial(data["delta_coeffs"], data["phi"])
        raise ModelError("curve file needs either 'pi' (bsc family) or 'delta_coeffs' and 'phi'")

    @classmethod
    def from_json(cls, path) -> "ModelCurve":
        return cls.from_dict(json.loads(Path(path).read_text()))
