import numpy as np
import pytest

from emgtrf.analysis import (compare_feature_sets, delta_r, partition_results, summarize_r,
                             weight_map)
from emgtrf.crossval import EncodingResult
from emgtrf.errors import DataError


def result(subject="S1", channel="ch1", mode="aloud", kind="A", r=0.5, thr=0.1, plan="p"):
    return EncodingResult(subject_id=subject, channel=channel, mode=mode, feature_kind=kind,
                          r_per_fold=[r], r_mean_fisher=r, chosen_alpha=0.01, chosen_lambda=0.1,
                          null_threshold_95=thr, plan_id=plan)


class TestWeightMap:
    def test_single_nonzero(self):
        w = np.zeros((3, 4, 5))          # channel, feature, lag
        w[1, 2, 2] = -0.7
        m = weight_map(w).matrix
        np.testing.assert_array_equal(m[:, 1], [0, 0, 1, 0])
        assert np.all(m[:, [0, 2]] == 0)

    def test_scale_invariant(self, rng):
        w = rng.normal(size=(2, 8, 4, 31))
        np.testing.assert_allclose(weight_map(w).matrix, weight_map(3 * w).matrix, rtol=1e-14)
        # per-channel scaling too, applied identically to every subject
        w2 = w * np.array([1.0, 5, 0.1, 2, 1, 1, 1, 1])[None, :, None, None]
        np.testing.assert_allclose(weight_map(w2).matrix, weight_map(w).matrix, rtol=1e-12)

    def test_two_subjects_by_hand(self):
        # 2 channels x 2 features, one lag each
        s1 = np.array([[[1.0], [3.0]], [[2.0], [0.0]]])
        s2 = np.array([[[3.0], [-1.0]], [[0.0], [4.0]]])
        wm = weight_map(np.stack([s1, s2]))
        np.testing.assert_allclose(wm.raw, [[2.0, 1.0], [2.0, 2.0]])
        np.testing.assert_allclose(wm.matrix, [[1.0, 0.5], [1.0, 1.0]])

    def test_range_and_peak(self, rng):
        wm = weight_map(rng.normal(size=(3, 8, 12, 31)))
        assert wm.matrix.shape == (12, 8)
        assert np.all((wm.matrix >= 0) & (wm.matrix <= 1))
        np.testing.assert_array_equal(wm.matrix.max(axis=0), 1.0)

    def test_all_zero_channel(self, rng):
        w = rng.normal(size=(3, 4, 5))
        w[2] = 0
        m = weight_map(w).matrix
        assert np.all(m[:, 2] == 0) and np.all(np.isfinite(m))

    def test_feature_selection(self, rng):
        w = rng.normal(size=(2, 14, 31))
        names = tuple(f"f{i}" for i in range(14))
        wm = weight_map(w, names, features=range(12))
        assert wm.matrix.shape == (12, 2) and wm.feature_names == names[:12]

    def test_bad_shape(self):
        with pytest.raises(DataError):
            weight_map(np.zeros((2, 3)))


class TestDeltaR:
    def test_identical(self):
        assert delta_r(result(), result(kind="P")) == 0.0

    def test_value_and_antisymmetry(self):
        a, p = result(r=0.5), result(kind="P", r=0.3)
        assert delta_r(a, p) == pytest.approx(0.2)
        assert delta_r(a, p) == -delta_r(p, a)

    def test_plan_mismatch(self):
        with pytest.raises(DataError):
            delta_r(result(), result(kind="P", plan="q"))

    def test_unpaired(self):
        with pytest.raises(DataError):
            delta_r(result(), result(kind="P", subject="S2"))


def cohort(n_subj=8, channels=("ch1", "ch2"), modes=("aloud", "mimed"), gap=0.1, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for s in range(n_subj):
        for mode in modes:
            for ch in channels:
                ra = 0.5 + 0.05 * rng.normal()
                out.append(result(f"S{s:02d}", ch, mode, "A", ra))
                out.append(result(f"S{s:02d}", ch, mode, "P", ra - gap + 0.01 * rng.normal()))
                out.append(result(f"S{s:02d}", ch, mode, "AP", ra + 0.01))
    return out


class TestCohort:
    def test_summary(self):
        rows = summarize_r(cohort())
        assert len(rows) == 2 * 3 * 2
        row = next(r for r in rows if (r["mode"], r["feature_kind"], r["channel"]) == ("aloud", "A", "ch1"))
        vals = [r.r_mean_fisher for r in cohort() if (r.mode, r.feature_kind, r.channel) == ("aloud", "A", "ch1")]
        assert row["mean_r"] == pytest.approx(np.mean(vals))
        assert row["sem_r"] == pytest.approx(np.std(vals, ddof=1) / np.sqrt(len(vals)))
        assert row["chance_r"] == pytest.approx(0.1) and row["n_subjects"] == 8

    def test_compare_positive_gap(self):
        comps = compare_feature_sets(cohort())
        assert len(comps) == 4
        for c in comps:
            assert c.deltas.size == 8 and np.all(c.deltas > 0)
            assert c.test.p_value == pytest.approx(2 / 256)
            assert c.test.significant_after_fdr and c.stars == "**"
            assert c.p_adjusted == pytest.approx(2 / 256)

    def test_compare_null_gap(self):
        comps = compare_feature_sets(cohort(gap=0.0, seed=2))
        assert all(c.stars == "n.s." or c.test.significant_after_fdr for c in comps)
        assert not all(c.test.significant_after_fdr for c in comps)

    def test_identical_sets(self):
        res = [r for r in cohort() if r.feature_kind == "A"]
        twins = [result(r.subject_id, r.channel, r.mode, "P", r.r_mean_fisher) for r in res]
        comps = compare_feature_sets(res + twins)
        assert all(c.test.p_value == 1.0 and not c.test.significant_after_fdr for c in comps)

    def test_partition_rows(self):
        parts = partition_results(cohort())
        assert len(parts) == 8 * 2 * 2
        for _, _, _, v in parts:
            assert v.unique_a + v.unique_p + v.shared == pytest.approx(v.r2_ap, abs=1e-15)
            assert v.unique_a > v.unique_p
