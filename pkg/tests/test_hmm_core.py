import numpy as np
import pytest
from hypothesis import given, strategies as st

from hmm_blackhole.errors import ModelError, NotIrreducible, SymbolOutOfRange, ZeroProbabilitySymbol
from hmm_blackhole.hmm_core import (
    HiddenMarkovModel,
    f_a,
    is_black_hole,
    permute_states,
    r_a,
    reverse_model,
    stationary_distribution,
    symbol_matrices,
    symbol_matrix,
)
from hmm_blackhole.jets import ModelCurve

from strategies import stochastic_matrices


def bsc_delta(pi, eps):
    return ModelCurve.bsc(pi).model_at(eps)


class TestValidation:
    def test_row_sum_error_names_row(self):
        with pytest.raises(ModelError, match="row 1"):
            HiddenMarkovModel(np.array([[0.5, 0.5], [0.5, 0.6]]), (0, 1))

    def test_negative_entry_names_position(self):
        with pytest.raises(ModelError, match="row 0, column 1"):
            HiddenMarkovModel(np.array([[1.2, -0.2], [0.5, 0.5]]), (0, 1))

    def test_phi_length(self):
        with pytest.raises(ModelError):
            HiddenMarkovModel(np.eye(2), (0,))

    def test_unused_symbol(self):
        with pytest.raises(ModelError, match="emitted by no state"):
            HiddenMarkovModel(np.full((2, 2), 0.5), (0, 0), n_symbols=2)

    def test_round_trip_dict(self, tmp_path):
        m = HiddenMarkovModel(np.array([[0.7, 0.3], [0.4, 0.6]]), (0, 1))
        path = tmp_path / "m.json"
        path.write_text(__import__("json").dumps(m.to_dict()))
        m2 = HiddenMarkovModel.from_json(path)
        assert np.array_equal(m.delta, m2.delta) and m.phi == m2.phi

    def test_missing_key(self):
        with pytest.raises(ModelError, match="missing"):
            HiddenMarkovModel.from_dict({"delta": [[1.0]]})


class TestStationary:
    def test_symmetric(self):
        assert np.allclose(stationary_distribution([[0.5, 0.5], [0.5, 0.5]]), [0.5, 0.5])

    def test_two_state(self):
        assert np.allclose(stationary_distribution([[0.7, 0.3], [0.4, 0.6]]), [4 / 7, 3 / 7], atol=1e-15)

    def test_identity_is_not_irreducible(self):
        with pytest.raises(NotIrreducible):
            stationary_distribution(np.eye(2))

    def test_transient_state_gets_zero(self):
        pi = stationary_distribution([[0.5, 0.5, 0.0], [0.0, 0.3, 0.7], [0.0, 0.6, 0.4]])
        assert pi[0] == 0.0
        assert np.allclose(pi[1:], [6 / 13, 7 / 13])

    @given(stochastic_matrices())
    def test_fixed_point(self, m):
        pi = stationary_distribution(m)
        assert abs(pi.sum() - 1) < 1e-12
        assert np.allclose(pi @ m, pi, atol=1e-12)


class TestSymbols:
    def test_bsc_symbol_zero_keeps_first_and_last_columns(self):
        m = bsc_delta([[0.7, 0.3], [0.4, 0.6]], 0.1)
        d0 = symbol_matrix(m, 0)
        assert np.array_equal(d0[:, [1, 2]], np.zeros((4, 2)))
        assert np.array_equal(d0[:, [0, 3]], m.delta[:, [0, 3]])

    def test_single_symbol(self):
        m = HiddenMarkovModel(np.array([[0.2, 0.8], [0.5, 0.5]]), (0, 0))
        assert np.array_equal(symbol_matrix(m, 0), m.delta)

    def test_out_of_range(self):
        m = HiddenMarkovModel(np.array([[0.2, 0.8], [0.5, 0.5]]), (0, 1))
        with pytest.raises(SymbolOutOfRange):
            symbol_matrix(m, 2)

    @given(stochastic_matrices(2, 5), st.data())
    def test_partition_of_columns(self, d, data):
        phi = data.draw(st.lists(st.integers(0, 2), min_size=len(d), max_size=len(d)))
        phi = [v for v in phi]
        used = sorted(set(phi))
        phi = [used.index(v) for v in phi]
        m = HiddenMarkovModel(d, tuple(phi))
        assert np.allclose(symbol_matrices(m).sum(axis=0), m.delta, atol=0)


class TestBelief:
    def test_constant_phi(self):
        m = HiddenMarkovModel(np.array([[0.2, 0.8], [0.5, 0.5]]), (0, 0))
        assert r_a(m, 0, [0.3, 0.7]) == pytest.approx(1.0)

    def test_bsc_marginal(self):
        eps = 0.1
        m = bsc_delta([[0.7, 0.3], [0.4, 0.6]], eps)
        w = stationary_distribution(m)
        assert r_a(m, 0, w) == pytest.approx((1 - eps) * 4 / 7 + eps * 3 / 7, abs=1e-15)

    def test_unit_vector(self):
        m = bsc_delta([[0.7, 0.3], [0.4, 0.6]], 0.1)
        for i in range(4):
            e = np.eye(4)[i]
            assert r_a(m, 1, e) == pytest.approx(symbol_matrix(m, 1)[i].sum())

    def test_identity_phi(self):
        m = HiddenMarkovModel(np.array([[0.2, 0.8], [0.5, 0.5]]), (0, 1))
        assert np.allclose(f_a(m, 1, [0.4, 0.6]), [0, 1])

    def test_zero_probability_symbol(self):
        m = HiddenMarkovModel(np.array([[1.0, 0.0], [0.5, 0.5]]), (0, 1))
        with pytest.raises(ZeroProbabilitySymbol):
            f_a(m, 1, [1.0, 0.0])

    def test_black_hole_collapses(self):
        m = bsc_delta([[0.7, 0.3], [0.4, 0.6]], 0.0)
        rng = np.random.default_rng(3)
        images = [f_a(m, 0, w / w.sum()) for w in rng.uniform(0.1, 1, (5, 4))]
        for img in images[1:]:
            assert np.allclose(img, images[0], atol=1e-15)

    @given(stochastic_matrices(2, 4), st.data())
    def test_symbol_probabilities_sum_to_one(self, d, data):
        m = HiddenMarkovModel(d, tuple([0, 1] + [0] * (len(d) - 2)))
        w = np.array(data.draw(st.lists(st.floats(0.01, 1), min_size=len(d), max_size=len(d))))
        w = w / w.sum()
        total = sum(r_a(m, a, w) for a in range(m.n_symbols))
        assert abs(total - 1) < 1e-12
        for a in range(m.n_symbols):
            if r_a(m, a, w) > 0:
                out = f_a(m, a, w)
                assert np.all(out >= 0) and abs(out.sum() - 1) < 1e-12


class TestBlackHole:
    def test_bsc_at_zero(self):
        assert is_black_hole(bsc_delta([[0.7, 0.3], [0.4, 0.6]], 0.0))

    def test_bsc_at_positive_eps(self):
        report = is_black_hole(bsc_delta([[0.7, 0.3], [0.4, 0.6]], 0.1))
        assert not report
        assert all(not s.rank_one for s in report.symbols)
        assert "black hole: False" in report.summary()

    def test_mixed_column_rejected(self):
        d = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])
        report = is_black_hole(HiddenMarkovModel(d, (0, 1, 1)))
        assert not report
        assert "mixed" in report.symbols[0].column_classes

    @given(st.permutations(range(4)), st.floats(0.0, 0.5))
    def test_permutation_invariance(self, perm, eps):
        m = bsc_delta([[0.7, 0.3], [0.4, 0.6]], eps)
        assert bool(is_black_hole(m)) == bool(is_black_hole(permute_states(m, perm)))


class TestReverse:
    def test_symmetric_matrix(self):
        d = np.array([[0.2, 0.8], [0.8, 0.2]])
        assert np.allclose(reverse_model(HiddenMarkovModel(d, (0, 1))).delta, d)

    def test_two_state_formula(self):
        d = np.array([[0.7, 0.3], [0.4, 0.6]])
        expected = np.diag([7 / 4, 7 / 3]) @ d.T @ np.diag([4 / 7, 3 / 7])
        assert np.allclose(reverse_model(HiddenMarkovModel(d, (0, 1))).delta, expected, atol=1e-15)

    @given(stochastic_matrices())
    def test_involution(self, d):
        m = HiddenMarkovModel(d, tuple([0, 1] + [0] * (len(d) - 2)))
        assert np.allclose(reverse_model(reverse_model(m)).delta, d, atol=1e-12)

    def test_requires_irreducible(self):
        with pytest.raises(NotIrreducible):
            reverse_model(HiddenMarkovModel(np.array([[1.0, 0.0], [0.5, 0.5]]), (0, 1)))
