"""Location-agnostic, segment-based detection metrics: ER and F1.

Segment-level class activity is binary here; per-class instance
multiplicity only matters for the joint metrics. ER and F1 are both
micro-averaged over segments and classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .annotations import SegmentView
from .errors import EmptyReference, MetricUndefined


@dataclass
class DetectionCounts:
    """Per-segment counts summed over classes. S/D/I follow the usual
    decomposition: S = min(FN, FP), D = FN - S, I = FP - S."""

    tp: int
    fp: int
    fn: int
    s: int
    d: int
    i: int
    n_ref: int

    @classmethod
    def from_errors(cls, tp: int, fp: int, fn: int, n_ref: int) -> "DetectionCounts":
        s = min(fn, fp)
        return cls(tp=tp, fp=fp, fn=fn, s=s, d=fn - s, i=fp - s, n_ref=n_ref)


def detection_counts(segments: Sequence[SegmentView]) -> list:
    """Binary per-class TP/FP/FN for every segment."""
    out = []
    for seg in segments:
        tp = fp = fn = n_ref = 0
        for stats in seg.classes.values():
            if stats.ref_active and stats.pred_active:
                tp += 1
            elif stats.pred_active:
                fp += 1
            elif stats.ref_active:
                fn += 1
            if stats.ref_active:
                n_ref += 1
        out.append(DetectionCounts.from_errors(tp, fp, fn, n_ref))
    return out


def error_rate(counts: Iterable[DetectionCounts]) -> float:
    """(sum S + sum D + sum I) / sum N_ref across segments; can exceed 1."""
    s = d = i = n_ref = 0
    for c in counts:
        s += c.s
        d += c.d
        i += c.i
        n_ref += c.n_ref
    if n_ref == 0:
        raise EmptyReference("error rate undefined: no reference activity in any segment")
    return (s + d + i) / n_ref


def f1_score(counts: Iterable[DetectionCounts]) -> float:
    """Micro-averaged 2*TP / (2*TP + FP + FN)."""
    tp = fp = fn = 0
    for c in counts:
        tp += c.tp
        fp += c.fp
        fn += c.fn
    denom = 2 * tp + fp + fn
    if denom == 0:
        raise MetricUndefined("F1 undefined: empty reference and empty prediction")
    return 2 * tp / denom
