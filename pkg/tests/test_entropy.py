import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hmm_blackhole import entropy as ent
from hmm_blackhole.errors import EnumerationTooLarge, NonpositiveConstantTerm, NotABlackHole
from hmm_blackhole.hmm_core import HiddenMarkovModel
from hmm_blackhole.jets import ModelCurve

from strategies import standard_pis, stochastic_matrices

PI = np.array([[0.7, 0.3], [0.4, 0.6]])
CURVE = ModelCurve.bsc(PI)

# Jet of h_n at eps = 0 for PI, from symbolic differentiation of the explicit
# word sum (sympy, independent of this package): value, first, second, third.
STABILIZED = {
    1: (0.63749888703533473716, 0.41574703007386684212, -2.4932333216936870939, 11.759009556203433754),
    2: (0.63749888703533473716, 0.41574703007386684212, -2.6594140797111798053, 17.699540287446368246),
    3: (0.63749888703533473716, 0.41574703007386684212, -2.6594140797111798053, 17.699540287446368246),
}
H3_AT_0_1 = 0.66814087493062980370

# Three-state chain whose two-symbol output is Markov when states 2 and 3 are lumped.
D_HAT = np.array([[1 / 4, 1 / 4, 1 / 2], [0, 1 / 6, 5 / 6], [7 / 8, 1 / 8, 0]])
LUMPED_H0 = 0.685314207276458
LUMPED_H = 0.628067837890962
# Same matrix with phi = (0, 0, 1): not Markov, h_0..h_4 by exact enumeration.
UNLUMPED_H = (0.661563238157982, 0.420632291880785, 0.413898191772696, 0.413670939032276, 0.413656523257817)


def brute_word_probability(pi, eps, word):
    """Sum over hidden paths (y_1..y_n) of p(y) prod p(z_t | y_t)."""
    s = (pi[1, 0] / (pi[0, 1] + pi[1, 0]), pi[0, 1] / (pi[0, 1] + pi[1, 0]))
    total = 0.0
    for ys in itertools.product((0, 1), repeat=len(word)):
        p = s[ys[0]]
        for t in range(1, len(ys)):
            p *= pi[ys[t - 1], ys[t]]
        for y, z in zip(ys, word):
            p *= (1 - eps) if y == z else eps
        total += p
    return total


class TestWordProbabilities:
    def test_iid_uniform(self):
        m = CURVE.__class__.bsc([[0.5, 0.5], [0.5, 0.5]]).model_at(0.3)
        assert np.allclose(ent.word_probabilities(m, 5), 2.0**-5, atol=1e-16)

    @pytest.mark.parametrize("word", ["00", "01", "110", "0101"])
    def test_bsc_against_path_sum(self, word):
        m = CURVE.model_at(0.1)
        assert ent.word_probability(m, word) == pytest.approx(brute_word_probability(PI, 0.1, [int(c) for c in word]), abs=1e-15)

    def test_lexicographic_order(self):
        m = CURVE.model_at(0.1)
        probs = ent.word_probabilities(m, 3)
        for code, p in enumerate(probs):
            assert p == pytest.approx(ent.word_probability(m, format(code, "03b")), abs=1e-15)

    @given(stochastic_matrices(2, 4), st.integers(1, 7))
    def test_normalization(self, d, length):
        m = HiddenMarkovModel(d, tuple([0, 1] + [0] * (len(d) - 2)))
        assert abs(ent.word_probabilities(m, length).sum() - 1) < 1e-12

    @given(standard_pis(), st.floats(0.01, 0.49), st.integers(1, 6))
    def test_jet_normalization(self, pi, eps, length):
        p = ent.word_probabilities(ModelCurve.bsc(pi), length, eps, 3)
        sums = p.sum(axis=0)
        assert abs(sums[0] - 1) < 1e-12
        assert np.all(np.abs(sums[1:]) < 1e-12)

    def test_jet_word_probability(self):
        j = ent.word_probability(CURVE, "01", 0.1, 2)
        h = 1e-5
        fd = (brute_word_probability(PI, 0.1 + h, [0, 1]) - brute_word_probability(PI, 0.1 - h, [0, 1])) / (2 * h)
        assert j.derivative(1) == pytest.approx(fd, abs=1e-9)

    def test_guard(self):
        with pytest.raises(EnumerationTooLarge):
            ent.word_probabilities(CURVE.model_at(0.1), 27)


class TestEntropyValues:
    def test_iid_uniform_is_log2(self):
        m = ModelCurve.bsc([[0.5, 0.5], [0.5, 0.5]]).model_at(0.3)
        for n in range(6):
            assert ent.h_n(m, n) == pytest.approx(math.log(2), abs=1e-15)

    @given(standard_pis())
    @settings(max_examples=10)
    def test_half_noise_is_log2(self, pi):
        m = ModelCurve.bsc(pi).model_at(0.5)
        assert abs(ent.h_n(m, 6) - math.log(2)) < 1e-13

    def test_noiseless_markov(self):
        m = HiddenMarkovModel(PI, (0, 1))
        s = np.array([4 / 7, 3 / 7])
        rate = -sum(s[i] * PI[i, j] * math.log(PI[i, j]) for i in range(2) for j in range(2))
        for n in range(1, 6):
            assert ent.h_n(m, n) == pytest.approx(rate, abs=1e-14)

    def test_frozen_value(self):
        assert ent.h_n(CURVE.model_at(0.1), 3) == pytest.approx(H3_AT_0_1, abs=1e-14)

    @pytest.mark.parametrize("phi", [(0, 1, 1), (1, 0, 0)])
    def test_lumped_chain_is_markov(self, phi):
        m = HiddenMarkovModel(D_HAT, phi)
        seq = ent.entropy_sequence(m, 4).values
        assert seq[0] == pytest.approx(LUMPED_H0, abs=1e-14)
        assert np.allclose(seq[1:], LUMPED_H, atol=1e-14)

    def test_unlumped_chain(self):
        seq = ent.entropy_sequence(HiddenMarkovModel(D_HAT, (0, 0, 1)), 4).values
        assert np.allclose(seq, UNLUMPED_H, atol=1e-14)

    @given(stochastic_matrices(2, 4))
    @settings(max_examples=20)
    def test_monotone(self, d):
        m = HiddenMarkovModel(d, tuple([0, 1] + [0] * (len(d) - 2)))
        seq = ent.entropy_sequence(m, 6).values
        assert all(seq[k + 1] <= seq[k] + 1e-12 for k in range(6))

    def test_block_entropy_difference(self):
        m = CURVE.model_at(0.2)
        assert ent.h_n(m, 4) == pytest.approx(ent.block_entropy(m, 5) - ent.block_entropy(m, 4), abs=1e-15)


class TestRateEstimate:
    def test_iid(self):
        r = ent.entropy_rate_estimate(ModelCurve.bsc([[0.5, 0.5], [0.5, 0.5]]).model_at(0.2))
        assert r.estimate == pytest.approx(math.log(2)) and r.n_used == 1 and abs(r.gap) < 1e-12

    def test_rank_one_closed_form(self):
        pi = np.array([[0.3, 0.7], [0.3, 0.7]])
        eps = 0.1
        q = 0.3 * (1 - eps) + 0.7 * eps
        r = ent.entropy_rate_estimate(ModelCurve.bsc(pi).model_at(eps))
        assert r.estimate == pytest.approx(-q * math.log(q) - (1 - q) * math.log(1 - q), abs=1e-12)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ent.entropy_rate_estimate(CURVE.model_at(0.1), n_max=0)


class TestJetsAndStabilization:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_frozen_jets(self, n):
        j = ent.h_n(CURVE, n, 0.0, 3)
        assert np.allclose(j.derivatives(), STABILIZED[n], rtol=0, atol=1e-10)

    def test_jet_value_matches_plain(self):
        assert ent.h_n(CURVE, 5, 0.2, 2).value == pytest.approx(ent.h_n(CURVE.model_at(0.2), 5), abs=1e-15)

    def test_first_derivative_vs_finite_difference(self):
        h = 1e-5
        fd = (ent.h_n(CURVE.model_at(0.2 + h), 4) - ent.h_n(CURVE.model_at(0.2 - h), 4)) / (2 * h)
        assert ent.h_n(CURVE, 4, 0.2, 1).derivative(1) == pytest.approx(fd, abs=1e-8)

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_stabilizing_length(self, order):
        assert ent.stabilizing_length(order) == math.ceil((order + 1) / 2)

    @given(standard_pis(0.1))
    @settings(max_examples=8)
    def test_stabilization_constant_in_n(self, pi):
        curve = ModelCurve.bsc(pi)
        for order in (1, 2, 3, 4):
            start = ent.stabilizing_length(order)
            vals = [ent.h_n(curve, n, 0.0, order).derivative(order) for n in range(start, start + 3)]
            scale = max(1.0, abs(vals[0]))
            assert max(vals) - min(vals) <= 1e-10 * scale

    def test_stabilized_derivative(self):
        res = ent.stabilized_derivative(CURVE, 0.0, 2)
        assert res.length == 2 and res.consistent
        assert res.value == pytest.approx(STABILIZED[2][2], abs=1e-11)
        assert res.pre_length == 1 and res.pre_differs

    def test_order_one_matches_h1(self):
        res = ent.stabilized_derivative(CURVE, 0.0, 1)
        assert res.length == 1
        for n in range(1, 7):
            assert ent.h_n(CURVE, n, 0.0, 1).derivative(1) == pytest.approx(res.value, abs=1e-11)

    def test_not_black_hole(self):
        with pytest.raises(NotABlackHole) as info:
            ent.stabilized_derivative(CURVE, 0.1, 1)
        assert info.value.report is not None and not info.value.report

    def test_symmetric_midpoint_is_not_black_hole(self):
        with pytest.raises(NotABlackHole):
            ent.stabilized_derivative(ModelCurve.bsc([[0.7, 0.3], [0.3, 0.7]]), 0.5, 1)

    def test_zero_order_rejected(self):
        with pytest.raises(ValueError):
            ent.stabilized_derivative(CURVE, 0.0, 0)

    def test_markov_first_derivative(self):
        res = ent.stabilized_derivative(CURVE, 0.0, 1)
        assert ent.markov_first_derivative(CURVE, 0.0) == pytest.approx(res.value, abs=1e-11)
        with pytest.raises(ValueError):
            ent.markov_first_derivative(CURVE, 0.0, assume_markov=False)

    def test_markov_first_derivative_lumped_curve(self):
        # along any perturbation direction the shortcut returns dH_1/deps
        c0 = D_HAT
        c1 = np.array([[0.1, -0.1, 0.0], [0.0, 0.1, -0.1], [-0.1, 0.0, 0.1]])
        curve = ModelCurve.polynomial([c0, c1], (0, 1, 1), domain=(0.0, 0.1))
        d = ent.markov_first_derivative(curve, 0.0)
        h = 1e-6
        fd = (ent.h_n(curve.model_at(h), 1) - ent.h_n(curve.model_at(0.0), 1)) / h
        assert d == pytest.approx(fd, abs=1e-5)

    def test_constant_curve(self):
        curve = ModelCurve.polynomial([PI], (0, 1))
        assert ent.markov_first_derivative(curve, 0.3) == 0.0

    def test_zero_word_with_nonzero_tail(self):
        # at eps = 0 with pi00 = 0 the word "00" has probability 0 but derivative > 0
        curve = ModelCurve.bsc([[0.0, 1.0], [0.5, 0.5]])
        with pytest.raises(NonpositiveConstantTerm):
            ent.h_n(curve, 2, 0.0, 1)


@pytest.mark.parametrize("threads", ["1", "2", "4"])
def test_thread_count_does_not_change_bits(monkeypatch, threads):
    monkeypatch.setattr(ent, "CHUNK_WORDS", 2**6)
    monkeypatch.setenv(ent.THREADS_ENV, "1")
    ref = ent.h_n(CURVE, 10, 0.1, 2).coeffs.copy()
    monkeypatch.setenv(ent.THREADS_ENV, threads)
    assert np.array_equal(ent.h_n(CURVE, 10, 0.1, 2).coeffs, ref)
