import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hdlse import _fallback, kernels
from hdlse.acquisition import (
    AcquisitionScores,
    acq_explicit_entropy,
    acq_explicit_mi,
    acq_explicit_varratio,
    acq_implicit_mi,
    implicit_G_values,
    implicit_terms,
    select_batch,
    write_scores_csv,
)
from hdlse.domain import CapacityError
from hdlse.surrogate import PredictionEnsemble
from oracles import binary_entropy, implicit_mi_bruteforce, substituted_q

try:
    from hdlse import _kernels
except ImportError:  # pragma: no cover
    _kernels = None

BACKENDS = [pytest.param(_fallback, id="python")]
if _kernels is not None:
    BACKENDS.append(pytest.param(_kernels, id="cython"))


def column(values):
    return np.asarray(values, dtype=float)[:, None]


def ensembles(max_m=10, max_n=30):
    """Small ensembles with many exact ties (values on a coarse grid)."""
    return st.tuples(st.integers(1, max_m), st.integers(1, max_n)).flatmap(
        lambda s: arrays(np.float64, s, elements=st.integers(-6, 6).map(lambda v: v / 2))
    )


class TestExplicit:
    def test_half(self):
        s = acq_explicit_mi(column([1.2, 0.8, 1.5, 0.7]), 1.0).scores
        assert s[0] == pytest.approx(math.log(2), abs=1e-12)

    def test_all_above(self):
        assert acq_explicit_mi(column([2, 3, 4]), 1.0).scores[0] == 0.0

    def test_three_quarters(self):
        expected = binary_entropy(0.75)
        assert expected == pytest.approx(0.562335, abs=1e-6)
        s = acq_explicit_mi(column([2, 2, 2, 0]), 1.0).scores[0]
        assert s == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize(
        "passes, expected",
        [
            ([1.2, 0.8, 1.5, 0.7], math.log(2)),
            ([2, 3, 4], 0.0),
            ([2, 2, 2, 0], binary_entropy(0.75)),
            ([0, 0, 0, 2], binary_entropy(0.25)),
            ([0, 0], 0.0),
        ],
    )
    def test_entropy_equals_mi_in_hard_mode(self, passes, expected):
        e = acq_explicit_entropy(column(passes), 1.0).scores[0]
        m = acq_explicit_mi(column(passes), 1.0).scores[0]
        assert e == pytest.approx(expected, abs=1e-12)
        assert m == pytest.approx(e, abs=1e-15)

    @pytest.mark.parametrize(
        "passes, expected", [([0, 2], 0.5), ([2, 2], 0.0), ([2, 2, 2, 0], 0.25)]
    )
    def test_varratio(self, passes, expected):
        assert acq_explicit_varratio(column(passes), 1.0).scores[0] == pytest.approx(expected)

    def test_soft_mode_bounded(self, rng):
        passes = rng.normal(size=(20, 50))
        s = acq_explicit_mi(passes, 0.0, soft_sigma=0.5).scores
        assert np.all(s >= 0) and np.all(s <= math.log(2) + 1e-12)

    @given(ensembles(), st.floats(-4, 4), st.floats(0.5, 10))
    def test_shift_invariance(self, passes, h, c):
        a = acq_explicit_mi(passes, h).scores
        b = acq_explicit_mi(passes + c, h + c).scores
        # the indicator flips only for values within rounding of h
        same = np.all(np.abs(passes - h) > 1e-9, axis=0)
        np.testing.assert_array_equal(a[same], b[same])

    @given(ensembles(), st.floats(-4, 4))
    def test_bounds(self, passes, h):
        s = acq_explicit_mi(passes, h).scores
        assert np.all(s >= 0) and np.all(s <= math.log(2) + 1e-12)


class TestGValues:
    def test_worked_example(self):
        passes = np.array([[1.0, 2.0, 4.0], [5.0, 2.0, 4.0]])
        g = implicit_G_values(passes, 0.5, 0)
        np.testing.assert_array_equal(g.thresholds, [2.0, 2.5])
        np.testing.assert_array_equal(g.q_values, [1, 2])
        q_ref, tau_ref = substituted_q(passes, 0.5)
        np.testing.assert_array_equal(q_ref[:, 0], [1, 2])
        np.testing.assert_array_equal(tau_ref[:, 0], [2.0, 2.5])

    def test_zero_ratio(self, rng):
        passes = rng.uniform(1, 2, size=(5, 8))
        for x in range(8):
            assert np.all(implicit_G_values(passes, 0.0, x).q_values == 8)

    def test_identical_passes(self, rng):
        passes = np.tile(rng.normal(size=6), (4, 1))
        q = implicit_G_values(passes, 0.7, 2).q_values
        assert np.all(q == q[0])

    def test_uses_supplied_mean(self):
        ens = PredictionEnsemble.from_passes([[1.0, 2.0, 4.0], [5.0, 2.0, 4.0]])
        assert implicit_G_values(ens, 0.5, 0).q_values.tolist() == [1, 2]

    @settings(max_examples=60)
    @given(ensembles(), st.sampled_from([0.0, 0.5, 0.9, 1.0]))
    def test_matches_bruteforce(self, passes, l):
        q_ref, tau_ref = substituted_q(passes, l)
        for x in range(passes.shape[1]):
            g = implicit_G_values(passes, l, x)
            np.testing.assert_array_equal(g.q_values, q_ref[:, x])
            np.testing.assert_array_equal(g.thresholds, tau_ref[:, x])


class TestImplicit:
    def test_worked_example(self):
        s = acq_implicit_mi(np.array([[1.0, 2.0, 4.0], [5.0, 2.0, 4.0]]), 0.5)
        assert s.scores[0] == pytest.approx(math.log(2), abs=1e-12)
        assert s.tie_cards[0] == 1

    def test_identical_passes(self, rng):
        s = acq_implicit_mi(np.tile(rng.normal(size=9), (6, 1)), 0.8)
        assert np.all(s.scores == 0)

    def test_single_pass(self, rng):
        assert np.all(acq_implicit_mi(rng.normal(size=(1, 9)), 0.8).scores == 0)

    @settings(max_examples=60)
    @given(ensembles(), st.sampled_from([0.0, 0.5, 0.9, 1.0]))
    def test_matches_bruteforce(self, passes, l):
        marg, cond, tie = implicit_mi_bruteforce(passes, l)
        m2, c2, t2 = implicit_terms(passes, l)
        np.testing.assert_allclose(m2, marg, atol=1e-12, rtol=0)
        np.testing.assert_array_equal(c2, cond)
        np.testing.assert_array_equal(t2, tie)
        assert np.all(np.abs(cond) < 1e-15)

    @given(ensembles(), st.floats(0, 1))
    def test_bounds(self, passes, l):
        s = acq_implicit_mi(passes, l).scores
        assert np.all(s >= 0) and np.all(s <= math.log(passes.shape[0]) + 1e-12)

    @given(ensembles(max_n=15), st.floats(0, 1), st.randoms())
    def test_permutation_equivariance(self, passes, l, r):
        perm = list(range(passes.shape[1]))
        r.shuffle(perm)
        a = acq_implicit_mi(passes, l)
        b = acq_implicit_mi(passes[:, perm], l)
        np.testing.assert_allclose(b.scores, a.scores[perm], atol=1e-12)
        np.testing.assert_array_equal(b.tie_cards, a.tie_cards[perm])
        ea = acq_explicit_mi(passes, 0.3).scores
        eb = acq_explicit_mi(passes[:, perm], 0.3).scores
        np.testing.assert_array_equal(eb, ea[perm])


@pytest.mark.parametrize("backend", BACKENDS)
class TestBackends:
    @settings(max_examples=40, deadline=None)
    @given(passes=ensembles(), l=st.sampled_from([0.0, 0.5, 0.9, 1.0]))
    def test_q_matches_bruteforce(self, backend, passes, l):
        q_ref, tau_ref = substituted_q(passes, l)
        q, tau = backend.implicit_q(passes, passes.mean(axis=0), l)
        np.testing.assert_array_equal(q, q_ref)
        np.testing.assert_array_equal(tau, tau_ref)

    @settings(max_examples=40, deadline=None)
    @given(passes=ensembles(), l=st.floats(0, 1))
    def test_scores_match_bruteforce(self, backend, passes, l):
        marg, _, tie = implicit_mi_bruteforce(passes, l)
        ent, t = backend.implicit_scores(passes, passes.mean(axis=0), l)
        np.testing.assert_allclose(ent, marg, atol=1e-12, rtol=0)
        np.testing.assert_array_equal(t, tie)

    def test_explicit_counts(self, backend, rng):
        passes = rng.normal(size=(7, 40))
        np.testing.assert_array_equal(
            backend.explicit_counts(passes, 0.1), (passes > 0.1).sum(axis=0)
        )

    def test_top_two(self, backend):
        assert backend.top_two(np.array([3.0, 7.0, 7.0, 1.0])) == (7.0, 1, 7.0)
        best, arg, second = backend.top_two(np.array([2.0]))
        assert (best, arg) == (2.0, 0) and second == -np.inf


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


class TestSelectBatch:
    def test_tie_cards(self):
        s = AcquisitionScores(np.array([0.3, 0.9, 0.9, 0.1]), np.array([0, 5, 2, 0]))
        assert select_batch(s, 2) == [2, 1]

    def test_argmax(self):
        assert select_batch(AcquisitionScores(np.array([0.1, 0.5, 0.2])), 1) == [1]

    def test_all(self):
        assert sorted(select_batch(AcquisitionScores(np.array([0.1, 0.5, 0.2])), 3)) == [0, 1, 2]

    def test_tolerance(self):
        s = AcquisitionScores(np.array([0.5, 0.5 + 5e-10, 0.4]), np.array([1, 3, 0]))
        assert select_batch(s, 1) == [0]

    def test_index_tiebreak(self):
        assert select_batch(AcquisitionScores(np.zeros(5)), 2) == [0, 1]

    def test_mask(self):
        s = AcquisitionScores(np.array([0.9, 0.8, 0.7]))
        assert select_batch(s, 2, mask=[False, True, True]) == [1, 2]

    def test_capacity(self):
        with pytest.raises(CapacityError):
            select_batch(AcquisitionScores(np.zeros(3)), 3, mask=[True, False, True])

    @given(arrays(np.float64, st.integers(1, 40), elements=st.integers(0, 5).map(float)), st.data())
    def test_order_matches_sort(self, scores, data):
        n = scores.size
        k = data.draw(st.integers(0, n))
        tie = data.draw(arrays(np.int64, n, elements=st.integers(0, 3)))
        got = select_batch(AcquisitionScores(scores, tie), k)
        ref = sorted(range(n), key=lambda i: (-scores[i], tie[i], i))[:k]
        assert got == ref


def test_scores_csv(tmp_path):
    path = tmp_path / "s.csv"
    write_scores_csv(AcquisitionScores(np.array([0.5, 0.25]), np.array([3, 1])), path)
    assert path.read_text().splitlines() == ["index,score,tie_card", "0,0.5,3", "1,0.25,1"]
