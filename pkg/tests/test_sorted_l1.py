import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.isotonic import isotonic_regression

from oracles import prox_enumeration
from slopekit import majorizes, prox_norm_bound_holds, prox_sorted_l1, sorted_l1_norm
from slopekit.checks import brute_force_prox
from slopekit.sorted_l1 import as_weights, isotonic_nonincreasing, sort_order

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@st.composite
def problems(draw, max_p=8):
    """A vector and weights of matching length; ties are likely."""
    p = draw(st.integers(1, max_p))
    pool = st.sampled_from([0.0, 0.5, 1.0, 2.0, 3.0, -1.0, -2.0]) | finite
    y = draw(arrays(float, p, elements=pool))
    lam = np.sort(np.abs(draw(arrays(float, p, elements=st.floats(0, 10)))))[::-1]
    lam[0] = max(lam[0], 0.1)
    return y, lam


class TestSortedL1Norm:
    def test_zero_vector(self):
        assert sorted_l1_norm(np.zeros(3), [3.0, 2.0, 1.0]) == 0.0

    def test_hand_value(self):
        assert sorted_l1_norm([1.0, -3.0, 2.0], [3.0, 2.0, 1.0]) == 14.0

    def test_ties(self):
        assert sorted_l1_norm([5.0, 5.0], [2.0, 1.0]) == 15.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            sorted_l1_norm([1.0, 2.0], [1.0])

    @given(problems(), st.floats(-5, 5))
    def test_norm_axioms(self, prob, c):
        b, lam = prob
        a = np.roll(b, 1)
        assert sorted_l1_norm(b, lam) >= 0
        assert np.isclose(sorted_l1_norm(c * b, lam), abs(c) * sorted_l1_norm(b, lam),
                          rtol=1e-12, atol=1e-12)
        lhs = sorted_l1_norm(a + b, lam)
        assert lhs <= sorted_l1_norm(a, lam) + sorted_l1_norm(b, lam) + 1e-9 * (1 + lhs)


class TestWeightValidation:
    def test_increasing_rejected(self):
        with pytest.raises(ValueError):
            as_weights([1.0, 2.0])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            as_weights([1.0, -0.1])

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            as_weights([0.0, 0.0])

    def test_trailing_zeros_allowed(self):
        assert as_weights([2.0, 0.0, 0.0]).tolist() == [2.0, 0.0, 0.0]


class TestMajorizes:
    def test_examples(self):
        assert majorizes([2.0, 1.0], [1.5, 1.4])
        assert not majorizes([2.0, 1.0], [2.1, 0.0])

    def test_reflexive(self):
        a = np.array([3.0, -1.0, 2.0])
        assert majorizes(a, a)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            majorizes([1.0], [1.0, 2.0])

    def test_uses_magnitudes(self):
        assert majorizes([-2.0, 1.0], [1.0, -1.5])


class TestProxExamples:
    def test_majorized_input_gives_zero(self):
        assert prox_sorted_l1([3.0, 2.0, 1.0], [3.0, 2.0, 1.0]).tolist() == [0.0, 0.0, 0.0]

    def test_identity_isotonic_step(self):
        np.testing.assert_allclose(prox_sorted_l1([5.0, 3.0], [2.0, 1.0]), [3.0, 2.0])

    def test_pooling_with_sign(self):
        np.testing.assert_allclose(prox_sorted_l1([3.5, -3.0], [2.0, 1.0]), [1.75, -1.75])

    def test_zero_input(self):
        assert prox_sorted_l1(np.zeros(4), [4.0, 3.0, 2.0, 1.0]).tolist() == [0.0] * 4

    @pytest.mark.parametrize("method", ["stack", "pava"])
    def test_both_methods(self, method):
        np.testing.assert_allclose(
            prox_sorted_l1([3.5, -3.0], [2.0, 1.0], method=method), [1.75, -1.75])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            prox_sorted_l1([1.0, 2.0], [1.0])

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            prox_sorted_l1([1.0], [1.0], method="bogus")

    def test_trailing_zero_weights(self):
        # no shrinkage is left for the small entries beyond the ordering
        np.testing.assert_allclose(prox_sorted_l1([5.0, 0.3, -0.2], [1.0, 0.0, 0.0]),
                                   [4.0, 0.3, -0.2])


class TestProxOracles:
    def test_matches_enumeration_small(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            p = int(rng.integers(1, 5))
            y = rng.standard_normal(p) * 3
            lam = np.sort(rng.exponential(1.0, p))[::-1]
            np.testing.assert_allclose(prox_sorted_l1(y, lam), prox_enumeration(y, lam),
                                       atol=1e-9)

    def test_block_oracle_matches_enumeration(self):
        rng = np.random.default_rng(12)
        for _ in range(40):
            p = int(rng.integers(1, 5))
            y = rng.standard_normal(p) * 3
            lam = np.sort(rng.exponential(1.0, p))[::-1]
            np.testing.assert_allclose(brute_force_prox(y, lam), prox_enumeration(y, lam),
                                       atol=1e-9)

    def test_pava_matches_sklearn(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            v = rng.standard_normal(int(rng.integers(1, 30)))
            ref = isotonic_regression(v, increasing=False)
            np.testing.assert_allclose(isotonic_nonincreasing(v), ref, atol=1e-12)

    @given(problems(max_p=10))
    @settings(max_examples=300)
    def test_stack_pava_agree(self, prob):
        y, lam = prob
        a = prox_sorted_l1(y, lam, method="stack")
        b = prox_sorted_l1(y, lam, method="pava")
        assert np.max(np.abs(a - b)) <= 1e-12
        prox_sorted_l1(y, lam, debug=True)


class TestProxProperties:
    @given(problems())
    def test_order_and_sign(self, prob):
        y, lam = prob
        x = prox_sorted_l1(y, lam)
        order = sort_order(y)
        assert np.all(np.diff(np.abs(x)[order]) <= 1e-12)
        nz = x != 0
        assert np.all(np.sign(x[nz]) == np.sign(y[nz]))

    @given(problems())
    def test_residual_majorized(self, prob):
        y, lam = prob
        x = prox_sorted_l1(y, lam)
        assert majorizes(lam, y - x, atol=1e-10 * (1 + np.abs(y).sum()))

    @given(problems())
    def test_majorized_input_zero(self, prob):
        y, lam = prob
        if majorizes(lam, y):
            assert np.all(prox_sorted_l1(y, lam) == 0.0)

    @given(problems())
    def test_norm_bound(self, prob):
        y, lam = prob
        assert prox_norm_bound_holds(y, lam, atol=1e-10 * (1 + np.abs(y).sum()))

    @given(problems(), st.randoms(use_true_random=False))
    def test_restriction(self, prob, rnd):
        a, lam = prob
        p = a.size
        if p < 2:
            return
        m = rnd.randint(1, p - 1)
        T = rnd.sample(range(p), m)
        rest = np.setdiff1d(np.arange(p), T)
        lhs = np.linalg.norm(prox_sorted_l1(a, lam)[rest])
        rhs = np.linalg.norm(prox_sorted_l1(a[rest], lam[m:]))
        assert lhs <= rhs + 1e-10 * (1 + np.abs(a).sum())

    @given(problems(), arrays(float, 8, elements=st.floats(0, 5)))
    def test_monotone(self, prob, bump):
        y, lam = prob
        y = np.abs(y)
        y2 = y + bump[: y.size]
        assert np.all(prox_sorted_l1(y, lam) <= prox_sorted_l1(y2, lam) + 1e-10 * (1 + y2.sum()))

    @given(problems(), arrays(float, 8, elements=finite))
    def test_nonexpansive(self, prob, other):
        a, lam = prob
        b = other[: a.size]
        lhs = np.linalg.norm(prox_sorted_l1(a, lam) - prox_sorted_l1(b, lam))
        assert lhs <= np.linalg.norm(a - b) * (1 + 1e-12) + 1e-12

    @given(problems())
    def test_prox_optimality(self, prob):
        # the prox beats nearby perturbations
        y, lam = prob
        x = prox_sorted_l1(y, lam)
        f = 0.5 * np.sum((y - x) ** 2) + sorted_l1_norm(x, lam)
        rng = np.random.default_rng(0)
        for _ in range(5):
            z = x + 1e-3 * rng.standard_normal(x.size)
            assert f <= 0.5 * np.sum((y - z) ** 2) + sorted_l1_norm(z, lam) + 1e-9


class TestNormBound:
    def test_equality_case(self):
        assert prox_norm_bound_holds([5.0, 3.0], [2.0, 1.0])

    def test_a_equals_lambda(self):
        lam = [3.0, 2.0, 1.0]
        assert prox_norm_bound_holds(lam, lam)

    def test_random_small(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            p = int(rng.integers(1, 9))
            a = rng.standard_normal(p) * 3
            lam = np.sort(rng.exponential(1.0, p))[::-1]
            assert prox_norm_bound_holds(a, lam, atol=1e-12)
