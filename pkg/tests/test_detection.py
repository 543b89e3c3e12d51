import pytest

from seldeval.annotations import SegmentClassStats, SegmentView
from seldeval.detection import DetectionCounts, detection_counts, error_rate, f1_score
from seldeval.errors import EmptyReference, MetricUndefined


def segment(idx, ref_labels, pred_labels):
    view = SegmentView(index=idx)
    for label in set(ref_labels) | set(pred_labels):
        view.classes[label] = SegmentClassStats(
            ref_active=label in ref_labels,
            pred_active=label in pred_labels,
        )
    return view


class TestCounts:
    def test_hit(self):
        (c,) = detection_counts([segment(0, {"speech"}, {"speech"})])
        assert (c.tp, c.fp, c.fn) == (1, 0, 0)
        assert (c.s, c.d, c.i) == (0, 0, 0)

    def test_substitution(self):
        (c,) = detection_counts([segment(0, {"speech"}, {"dog"})])
        assert (c.fn, c.fp) == (1, 1)
        assert (c.s, c.d, c.i) == (1, 0, 0)

    def test_insertions(self):
        (c,) = detection_counts([segment(0, set(), {"dog", "car"})])
        assert c.i == 2 and c.s == 0 and c.d == 0

    def test_sdi_invariant(self):
        for fn in range(4):
            for fp in range(4):
                c = DetectionCounts.from_errors(tp=0, fp=fp, fn=fn, n_ref=fn)
                assert c.s == min(fn, fp)
                assert c.d == fn - c.s and c.i == fp - c.s
                assert c.s >= 0 and c.d >= 0 and c.i >= 0


class TestErrorRate:
    def test_perfect(self):
        counts = detection_counts([segment(0, {"a"}, {"a"}), segment(1, {"b"}, {"b"})])
        assert error_rate(counts) == 0.0

    def test_silence_is_all_deletions(self):
        counts = detection_counts([segment(0, {"a", "b"}, set()), segment(1, {"a"}, set())])
        assert error_rate(counts) == 1.0

    def test_always_on_output_exceeds_one(self):
        labels = {f"c{i}" for i in range(11)}
        counts = detection_counts([segment(0, {"c0"}, labels)])
        assert error_rate(counts) == pytest.approx(10.0)

    def test_empty_reference(self):
        with pytest.raises(EmptyReference):
            error_rate(detection_counts([segment(0, set(), {"a"})]))


class TestF1:
    def test_perfect(self):
        assert f1_score(detection_counts([segment(0, {"a"}, {"a"})])) == 1.0

    def test_disjoint(self):
        counts = detection_counts([segment(0, {"a"}, {"b"}), segment(1, {"c"}, {"d"})])
        assert f1_score(counts) == 0.0

    def test_formula(self):
        counts = [DetectionCounts.from_errors(tp=1, fp=2, fn=2, n_ref=3)]
        assert f1_score(counts) == pytest.approx(1 / 3, abs=1e-12)

    def test_undefined(self):
        with pytest.raises(MetricUndefined):
            f1_score(detection_counts([segment(0, set(), set())]))


class TestProperties:
    def _random_segments(self, seed, n=40):
        import random

        rng = random.Random(seed)
        labels = ["a", "b", "c", "d", "e"]
        segs = []
        for i in range(n):
            ref = {lb for lb in labels if rng.random() < 0.4}
            pred = {lb for lb in labels if rng.random() < 0.4}
            segs.append(segment(i, ref, pred))
        return segs

    @pytest.mark.parametrize("seed", range(5))
    def test_er_zero_iff_f1_one(self, seed):
        segs = self._random_segments(seed)
        counts = detection_counts(segs)
        try:
            er = error_rate(counts)
            f1 = f1_score(counts)
        except (EmptyReference, MetricUndefined):
            return
        assert (er == 0.0) == (f1 == 1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_doubling_dataset_invariant(self, seed):
        segs = self._random_segments(seed)
        counts = detection_counts(segs)
        doubled = detection_counts(segs + segs)
        try:
            assert error_rate(doubled) == pytest.approx(error_rate(counts), abs=1e-12)
            assert f1_score(doubled) == pytest.approx(f1_score(counts), abs=1e-12)
        except (EmptyReference, MetricUndefined):
            pass
