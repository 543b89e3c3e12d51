"""Event-list data model, file formats, and the frame/segment grid.

Reference files are event-level CSV rows
``class_label,onset_s,offset_s,azimuth_deg,elevation_deg[,distance_m]``
(header optional, auto-detected; the distance column is accepted and
ignored). Prediction files are frame-level CSV rows
``frame_index,class_index,azimuth_deg,elevation_deg``. Vocabulary files
hold one class label per line; the 0-based line number is the class
index. Files are UTF-8, comma-separated, ``.`` decimal point, LF or CRLF.

References are rasterized onto the frame grid (an event is active in
frame ``l`` iff ``[l*hop, (l+1)*hop)`` intersects ``[onset, offset)``)
so that both sides of the evaluation are frame streams.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .assignment import build_distance_matrix, hungarian
from .errors import ConfigError, InvalidInterval, ParseError, UnknownClass
from .geometry import Direction

# Snap tolerance, in frame units, for onset/offset landing on a frame
# boundary up to float rounding.
_GRID_EPS = 1e-9


class Vocabulary:
    """Ordered class labels with a bidirectional label/index map."""

    def __init__(self, labels: Sequence[str]):
        labels = tuple(str(lb) for lb in labels)
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels in vocabulary")
        if not labels:
            raise ValueError("empty vocabulary")
        self.labels = labels
        self._index = {lb: i for i, lb in enumerate(labels)}

    @classmethod
    def from_file(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([ln.strip() for ln in lines if ln.strip()])

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownClass(f"class label {label!r} not in vocabulary") from None

    def label(self, index: int) -> str:
        if not 0 <= index < len(self.labels):
            raise UnknownClass(f"class index {index} outside vocabulary of size {len(self.labels)}")
        return self.labels[index]

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def __iter__(self):
        return iter(self.labels)


@dataclass(frozen=True)
class EventRecord:
    """One annotated sound event with a fixed location."""

    label: str
    onset: float
    offset: float
    direction: Direction


@dataclass
class FrameSnapshot:
    """Class/direction instances active in one analysis frame.

    `instances` is a multiset: the same class may appear more than once
    (two simultaneous events of the same class).
    """

    index: int
    instances: list = field(default_factory=list)


@dataclass
class SegmentClassStats:
    """Per-class activity and frame-pair evidence inside one segment."""

    ref_active: bool = False
    pred_active: bool = False
    ref_max: int = 0   # max simultaneous reference instances over member frames
    pred_max: int = 0
    ref_frame_count: int = 0   # sum of per-frame reference instance counts
    pair_count: int = 0        # frame-level associated pairs within the class
    pair_dist_sum: float = 0.0
    ref_dirs: list = field(default_factory=list)   # pooled over member frames
    pred_dirs: list = field(default_factory=list)


@dataclass
class SegmentView:
    index: int
    classes: dict = field(default_factory=dict)  # label -> SegmentClassStats


def parse_vocabulary(path) -> Vocabulary:
    return Vocabulary.from_file(path)


def _parse_float(text: str, what: str, path, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {what} from {text!r}", path, lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite {what}: {text!r}", path, lineno)
    return value


def parse_reference(path, vocabulary: Vocabulary) -> list:
    """Read an event-level reference file into validated EventRecords."""
    events = []
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            row = [cell.strip() for cell in row]
            if len(row) not in (5, 6):
                raise ParseError(f"expected 5 or 6 fields, got {len(row)}", path, lineno)
            if lineno == 1:
                try:
                    float(row[1])
                except ValueError:
                    continue  # header row
            label = row[0]
            if label not in vocabulary:
                raise UnknownClass(f"class label {label!r} not in vocabulary ({path}:{lineno})")
            onset = _parse_float(row[1], "onset", path, lineno)
            offset = _parse_float(row[2], "offset", path, lineno)
            if onset < 0 or onset >= offset:
                raise InvalidInterval(f"need 0 <= onset < offset, got [{onset}, {offset}) ({path}:{lineno})")
            azimuth = _parse_float(row[3], "azimuth", path, lineno)
            elevation = _parse_float(row[4], "elevation", path, lineno)
            try:
                direction = Direction(azimuth, elevation)
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
            events.append(EventRecord(label, onset, offset, direction))
    return events


def parse_prediction(path, vocabulary: Vocabulary, frame_hop: float = 0.02) -> list:
    """Read a frame-level prediction file into sparse FrameSnapshots.

    Snapshots are grouped by frame index and sorted ascending; frames
    absent from the file mean the system predicted silence there.
    """
    if frame_hop <= 0:
        raise ConfigError(f"frame hop must be positive, got {frame_hop}")
    path = Path(path)
    by_frame: dict = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            row = [cell.strip() for cell in row]
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", path, lineno)
            if lineno == 1:
                try:
                    int(row[0])
                except ValueError:
                    continue  # header row
            try:
                frame = int(row[0])
                class_index = int(row[1])
            except ValueError:
                raise ParseError(f"cannot parse frame/class index from {row!r}", path, lineno) from None
            if frame < 0:
                raise ParseError(f"negative frame index {frame}", path, lineno)
            label = vocabulary.label(class_index)
            azimuth = _parse_float(row[2], "azimuth", path, lineno)
            elevation = _parse_float(row[3], "elevation", path, lineno)
            try:
                direction = Direction(azimuth, elevation)
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
            by_frame.setdefault(frame, []).append((label, direction))
    return [FrameSnapshot(idx, by_frame[idx]) for idx in sorted(by_frame)]


def write_reference(path, events: Iterable[EventRecord]) -> None:
    lines = []
    for ev in events:
        lines.append(
            f"{ev.label},{ev.onset!r},{ev.offset!r},{ev.direction.azimuth!r},{ev.direction.elevation!r}"
        )
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_prediction(path, frames: Iterable[FrameSnapshot], vocabulary: Vocabulary) -> None:
    """Write frame-level rows, sorted by frame, class index, then DoA."""
    lines = []
    for frame in frames:
        rows = sorted(
            (vocabulary.index(label), d.azimuth, d.elevation) for label, d in frame.instances
        )
        for class_index, az, el in rows:
            lines.append(f"{frame.index},{class_index},{az!r},{el!r}")
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def frame_span(onset: float, offset: float, frame_hop: float):
    """First and last frame index whose window intersects [onset, offset)."""
    first = math.floor(onset / frame_hop + _GRID_EPS)
    last = math.ceil(offset / frame_hop - _GRID_EPS) - 1
    return max(first, 0), last


def rasterize(events: Sequence[EventRecord], frame_hop: float, total_frames: int) -> list:
    """Expand events onto a dense frame grid of `total_frames` snapshots."""
    if frame_hop <= 0:
        raise ConfigError(f"frame hop must be positive, got {frame_hop}")
    frames = [FrameSnapshot(i) for i in range(total_frames)]
    for ev in events:
        first, last = frame_span(ev.onset, ev.offset, frame_hop)
        if last >= total_frames:
            raise ValueError(
                f"event ending at {ev.offset} s exceeds the {total_frames}-frame grid"
            )
        for idx in range(first, last + 1):
            frames[idx].instances.append((ev.label, ev.direction))
    return frames


def densify(snapshots: Sequence[FrameSnapshot], total_frames: int) -> list:
    """Expand sparse snapshots to a dense list with empty frames filled in."""
    frames = [FrameSnapshot(i) for i in range(total_frames)]
    for snap in snapshots:
        if snap.index >= total_frames:
            raise ValueError(f"frame index {snap.index} exceeds the {total_frames}-frame grid")
        frames[snap.index].instances.extend(snap.instances)
    return frames


def frames_per_segment(segment_length: float, frame_hop: float) -> int:
    ratio = segment_length / frame_hop
    spf = round(ratio)
    if spf < 1 or abs(ratio - spf) > 1e-6:
        raise ConfigError(
            f"segment length {segment_length} is not a multiple of the frame hop {frame_hop}"
        )
    return spf


def _group_by_label(instances):
    grouped: dict = {}
    for label, direction in instances:
        grouped.setdefault(label, []).append(direction)
    return grouped


def segmentize(
    pred_frames: Sequence[FrameSnapshot],
    ref_frames: Sequence[FrameSnapshot],
    segment_length: float,
    frame_hop: float,
) -> list:
    """Aggregate aligned frame streams into non-overlapping segments.

    A class is active in a segment iff it is active in at least one
    member frame. Instance counts are the maximum simultaneous count over
    member frames, and localization evidence is accumulated from the
    frame-level class-sliced associations.
    """
    from .errors import LengthMismatch

    if len(pred_frames) != len(ref_frames):
        raise LengthMismatch(
            f"prediction has {len(pred_frames)} frames, reference {len(ref_frames)}"
        )
    spf = frames_per_segment(segment_length, frame_hop)
    total = len(pred_frames)
    segments = []
    for seg_index in range(0, (total + spf - 1) // spf):
        view = SegmentView(index=seg_index)
        for fi in range(seg_index * spf, min((seg_index + 1) * spf, total)):
            preds = _group_by_label(pred_frames[fi].instances)
            refs = _group_by_label(ref_frames[fi].instances)
            for label in preds.keys() | refs.keys():
                stats = view.classes.get(label)
                if stats is None:
                    stats = view.classes[label] = SegmentClassStats()
                p_dirs = preds.get(label, ())
                r_dirs = refs.get(label, ())
                if p_dirs:
                    stats.pred_active = True
                    stats.pred_max = max(stats.pred_max, len(p_dirs))
                    stats.pred_dirs.extend(p_dirs)
                if r_dirs:
                    stats.ref_active = True
                    stats.ref_max = max(stats.ref_max, len(r_dirs))
                    stats.ref_frame_count += len(r_dirs)
                    stats.ref_dirs.extend(r_dirs)
                if p_dirs and r_dirs:
                    d = build_distance_matrix(p_dirs, r_dirs)
                    for i, j in hungarian(d).pairs:
                        stats.pair_count += 1
                        stats.pair_dist_sum += d.values[i][j]
        segments.append(view)
    return segments
