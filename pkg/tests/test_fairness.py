"""
Tests for similarity matrices, per-individual concordance, rankings,
FNDCG@k and the Lipschitz penalty.
"""
import math

import numpy as np
import pytest


def _concordance_oracle(r, time, event):
    n = len(r)
    num = [0] * n
    cnt = [0] * n
    for a in range(n):
        for b in range(n):
            if a != b and event[a] and time[a] < time[b]:
                cnt[a] += 1
                cnt[b] += 1
                if r[b] < r[a]:
                    num[a] += 1
                    num[b] += 1
    return num, cnt


def _fndcg_oracle(G, A, k):
    """Explicit sorts and DCG sums per anchor."""
    n = len(G)
    ratios = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        ideal = sorted(others, key=lambda j: (-G[i][j], j))[:k]
        actual = sorted(others, key=lambda j: (-A[i][j], j))[:k]
        idcg = sum(G[i][j] / math.log2(pos + 2) for pos, j in enumerate(ideal))
        dcg = sum(G[i][j] / math.log2(pos + 2) for pos, j in enumerate(actual))
        if idcg > 0:
            ratios.append(dcg / idcg)
    return sum(ratios) / len(ratios)


def _sim(values, kind="input"):
    from fairsurv.models.similarity import SimilarityMatrix
    return SimilarityMatrix(np.asarray(values, dtype=float), kind)


class TestSimilarity:
    def test_input_similarity(self):
        from fairsurv.models.dataset import SurvivalDataset
        from fairsurv.services.fairness import input_similarity
        data = SurvivalDataset(X=[[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]], time=[1, 2, 3], event=[1, 1, 1])
        sim = input_similarity(data)
        np.testing.assert_allclose(np.diag(sim.values), 1.0)
        assert sim.values[0, 1] == pytest.approx(math.exp(-5.0))
        np.testing.assert_allclose(sim.values, sim.values.T)

    def test_output_similarity_range(self, make_censored):
        from fairsurv.services.fairness import output_similarity
        data = make_censored(15, 2, seed=1)
        sim = output_similarity(np.exp(data.X @ np.array([0.5, -0.5])), data)
        assert sim.values.min() >= 0.0 and sim.values.max() <= 1.0
        np.testing.assert_allclose(np.diag(sim.values), 1.0)

    def test_adjustment_penalises_concordance_gap(self):
        from fairsurv.models.similarity import ConcordanceVector
        from fairsurv.services.fairness import output_similarity_adjusted, output_similarity_raw
        raw = output_similarity_raw(np.array([1.0, 1.0]))
        adjusted = output_similarity_adjusted(raw, ConcordanceVector(values=[1.0, 0.25], defined=[True, True]))
        assert adjusted.values[0, 1] == pytest.approx(0.25)

    def test_adjustment_size_mismatch(self):
        from fairsurv.core.errors import DataValidationError
        from fairsurv.models.similarity import ConcordanceVector
        from fairsurv.services.fairness import output_similarity_adjusted, output_similarity_raw
        with pytest.raises(DataValidationError):
            output_similarity_adjusted(output_similarity_raw(np.ones(3)), ConcordanceVector([1.0], [True]))


class TestConcordance:
    """Per-individual concordance over comparable pairs."""

    def _data(self, time, event):
        from fairsurv.models.dataset import SurvivalDataset
        return SurvivalDataset(X=np.zeros((len(time), 1)), time=time, event=event)

    def test_hand_example(self):
        from fairsurv.services.fairness import individual_concordance
        conc = individual_concordance(np.array([3.0, 1.0, 2.0]), self._data([1.0, 2.0, 3.0], [1, 1, 1]))
        np.testing.assert_allclose(conc.values, [1.0, 0.5, 0.5])
        assert conc.defined.all()

    def test_perfect_and_reversed(self):
        from fairsurv.services.fairness import individual_concordance
        data = self._data([1.0, 2.0, 3.0], [1, 1, 1])
        np.testing.assert_array_equal(individual_concordance(np.array([3.0, 2.0, 1.0]), data).values, [1, 1, 1])
        np.testing.assert_array_equal(individual_concordance(np.array([1.0, 2.0, 3.0]), data).values, [0, 0, 0])

    def test_no_comparable_pairs(self):
        from fairsurv.services.fairness import individual_concordance
        conc = individual_concordance(np.array([1.0, 2.0]), self._data([1.0, 2.0], [0, 1]))
        np.testing.assert_array_equal(conc.values, [0.0, 0.0])
        assert not conc.defined.any()

    def test_tied_times_not_comparable(self):
        from fairsurv.services.fairness import concordance_counts
        num, cnt = concordance_counts(np.array([2.0, 1.0]), np.array([1.0, 1.0]), np.array([True, True]))
        assert cnt.tolist() == [0, 0]

    def test_matches_oracle(self):
        from fairsurv.services.fairness import concordance_counts
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 31))
            r = np.exp(rng.standard_normal(n))
            time = rng.integers(1, 10, n).astype(float)
            event = rng.random(n) < rng.uniform(0.4, 0.8)
            num, cnt = concordance_counts(r, time, event, block_rows=7)
            exp_num, exp_cnt = _concordance_oracle(r, time, event)
            assert num.tolist() == exp_num
            assert cnt.tolist() == exp_cnt

    def test_pooled_counts_equal_c_index(self, make_censored):
        """Pooling per-individual counts over pairs reproduces the global C-index."""
        from fairsurv.services.evaluation import c_index
        from fairsurv.services.fairness import concordance_counts
        for seed in range(20):
            data = make_censored(25, 2, seed=seed)
            r = np.exp(data.X @ np.array([0.8, -0.3]))
            num, cnt = concordance_counts(r, data.time, data.event)
            if cnt.sum() == 0:
                continue
            assert num.sum() / cnt.sum() == pytest.approx(c_index(r, data), abs=1e-12)


class TestRanking:
    def test_rank_excludes_anchor_ties_by_index(self):
        from fairsurv.services.fairness import rank_by_similarity
        sim = _sim([[1.0, 0.5, 0.5, 0.9], [0.5, 1.0, 0.2, 0.1], [0.5, 0.2, 1.0, 0.3], [0.9, 0.1, 0.3, 1.0]])
        assert rank_by_similarity(sim, 0).order.tolist() == [3, 1, 2]
        assert rank_by_similarity(sim, 0).top(2).tolist() == [3, 1]

    def test_dcg(self):
        from fairsurv.models.similarity import RankedList
        from fairsurv.services.fairness import dcg_at_k
        order = RankedList(anchor=0, order=[3, 1, 2])
        gains = np.array([0.0, 0.5, 0.25, 1.0])
        assert dcg_at_k(order, gains, 2) == pytest.approx(1.0 + 0.5 / math.log2(3))

    def test_k_bounds(self):
        from fairsurv.core.errors import DataValidationError
        from fairsurv.services.fairness import fndcg_at_k
        sim = _sim(np.eye(3) * 0.5 + 0.5)
        for k in (0, 3):
            with pytest.raises(DataValidationError):
                fndcg_at_k(sim, sim, k)


class TestFndcg:
    """FNDCG@k against brute force and its invariants."""

    def test_identical_orderings_score_one(self, make_censored):
        from fairsurv.services.fairness import fndcg_at_k, input_similarity
        sim = input_similarity(make_censored(10, 2, seed=2))
        assert fndcg_at_k(sim, sim, 4) == pytest.approx(1.0, abs=1e-12)

    def test_matches_oracle(self, make_censored):
        from fairsurv.services.fairness import fndcg_at_k, input_similarity, output_similarity
        rng = np.random.default_rng(1)
        for seed in range(200):
            n = int(rng.integers(3, 13))
            data = make_censored(n, 2, seed=seed, censor_prob=rng.uniform(0.2, 0.6))
            r = np.exp(data.X @ rng.standard_normal(2))
            G, A = input_similarity(data), output_similarity(r, data)
            k = int(rng.integers(1, n))
            expected = _fndcg_oracle(G.values.tolist(), A.values.tolist(), k)
            assert fndcg_at_k(G, A, k) == pytest.approx(expected, abs=1e-12)

    def test_at_most_one(self, make_censored):
        from fairsurv.services.fairness import fndcg_at_k, input_similarity, output_similarity
        rng = np.random.default_rng(2)
        for seed in range(100):
            data = make_censored(8, 3, seed=seed)
            r = np.exp(data.X @ rng.standard_normal(3))
            value = fndcg_at_k(input_similarity(data), output_similarity(r, data), 3)
            assert 0.0 < value <= 1.0 + 1e-12

    def test_rank_transform_invariance(self, make_censored):
        """Risk enters only through orderings of a monotone similarity."""
        from fairsurv.services.fairness import fndcg_at_k, input_similarity, output_similarity
        data = make_censored(12, 2, seed=3)
        G = input_similarity(data)
        r = np.exp(data.X @ np.array([0.8, -0.2]))
        base = fndcg_at_k(G, output_similarity(r, data), 3)
        # constant shifts keep every |r_a - r_b| and every concordance
        assert fndcg_at_k(G, output_similarity(r + 5.0, data), 3) == pytest.approx(base, abs=1e-12)

    def test_all_anchors_skipped(self):
        from fairsurv.core.errors import MetricUndefinedError
        from fairsurv.services.fairness import fndcg_at_k
        G = _sim(np.eye(4))
        with pytest.raises(MetricUndefinedError):
            fndcg_at_k(G, _sim(np.full((4, 4), 0.5), "output"), 2)

    def test_per_anchor_marks_skipped(self):
        from fairsurv.services.fairness import fndcg_per_anchor
        G = np.full((3, 3), 0.5)
        G[0, 1] = G[0, 2] = 0.0
        ratios = fndcg_per_anchor(_sim(G), _sim(np.full((3, 3), 0.5), "output"), 1)
        assert math.isnan(ratios[0])
        assert ratios[1] == pytest.approx(1.0)

    def test_model_fndcg_matches_matrices(self, make_censored):
        from fairsurv.services.fairness import fndcg_at_k, input_similarity, model_fndcg, output_similarity
        data = make_censored(23, 3, seed=9)
        beta = np.array([0.4, -0.6, 0.2])
        expected = fndcg_at_k(input_similarity(data), output_similarity(np.exp(data.X @ beta), data), 5)
        assert model_fndcg(beta, data, 5, block_rows=4) == pytest.approx(expected, abs=1e-9)


class TestLipschitz:
    def test_hand_example(self):
        from fairsurv.services.fairness import lipschitz_penalty
        X = np.array([[0.0], [1.0]])
        assert lipschitz_penalty(X, np.array([1.0, 4.0]), 1.0) == pytest.approx(2.0)
        assert lipschitz_penalty(X, np.array([1.0, 4.0]), 5.0) == 0.0

    def test_rejects_non_positive_L(self):
        from fairsurv.core.errors import DataValidationError
        from fairsurv.services.fairness import lipschitz_penalty
        with pytest.raises(DataValidationError):
            lipschitz_penalty(np.zeros((2, 1)), np.ones(2), 0.0)

    def test_gradient_consistent(self, make_censored):
        from fairsurv.services.fairness import lipschitz_penalty, lipschitz_penalty_gradient
        data = make_censored(10, 2, seed=4)
        beta = np.array([1.2, -0.8])
        value, grad = lipschitz_penalty_gradient(beta, data.X, 0.5)
        assert value == pytest.approx(lipschitz_penalty(data.X, np.exp(data.X @ beta), 0.5), abs=1e-12)
        h = 1e-6
        fd = np.array([
            (lipschitz_penalty(data.X, np.exp(data.X @ (beta + h * e)), 0.5)
             - lipschitz_penalty(data.X, np.exp(data.X @ (beta - h * e)), 0.5)) / (2 * h)
            for e in np.eye(2)
        ])
        np.testing.assert_allclose(grad, fd, rtol=1e-4, atol=1e-8)


class TestSimilarityExport:
    def test_roundtrip(self, tmp_dir, make_censored):
        from fairsurv.models.similarity import SimilarityKind
        from fairsurv.services.fairness import export_similarity, input_similarity, read_similarity
        sim = input_similarity(make_censored(6, 2, seed=0))
        path = tmp_dir / "sim.bin"
        export_similarity(sim, str(path))
        assert path.stat().st_size == 17 + 8 * 36
        loaded = read_similarity(str(path))
        assert loaded.kind is SimilarityKind.INPUT
        np.testing.assert_array_equal(loaded.values, sim.values)

    def test_bad_magic(self, tmp_dir):
        from fairsurv.core.errors import DataValidationError
        from fairsurv.services.fairness import read_similarity
        path = tmp_dir / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(DataValidationError):
            read_similarity(str(path))
