"""Shared hypothesis strategies."""

import numpy as np
from hypothesis import strategies as st


def stochastic_matrices(min_size=2, max_size=4, positive=True):
    lo = 0.05 if positive else 0.0

    @st.composite
    def build(draw):
        b = draw(st.integers(min_size, max_size))
        rows = []
        for _ in range(b):
            w = draw(st.lists(st.floats(lo, 1.0), min_size=b, max_size=b))
            w = np.array(w) + (1e-3 if not positive else 0.0)
            rows.append(w / w.sum())
        return np.array(rows)

    return build()


@st.composite
def standard_pis(draw, lo=0.05):
    """2x2 stochastic matrices with all entries positive and det > 0."""
    a = draw(st.floats(lo, 1 - lo))
    b = draw(st.floats(lo, 1 - lo))
    if (1 - a) * (1 - b) - a * b <= 0.02:
        a, b = min(a, b) / 2, min(a, b) / 2
    return np.array([[1 - a, a], [b, 1 - b]])


@st.composite
def positive_jets(draw, order):
    c = draw(st.lists(st.floats(-1.0, 1.0), min_size=order + 1, max_size=order + 1))
    c[0] = draw(st.floats(0.5, 2.0))
    return np.array(c)
