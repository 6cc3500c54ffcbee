"""AVA-format detection and ground-truth records, CSV loading, and immutable stores.

Pinned CSV dialect: UTF-8, comma-separated, no header. Detection rows carry
``video_id,timestamp,x1,y1,x2,y2,action_id,score``; ground-truth rows omit the
score column (a trailing score field is tolerated only when explicitly
ignored). Coordinates and scores are printed with six decimal places, which
round-trips exactly through ``float``.

Range validation happens at the file boundary. In-memory constructors trust
their callers so that analytical transforms (e.g. rescaling every confidence
by a constant) stay representable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import DataFormatError
from .utils import atomic_write_text

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in normalized [0, 1] image coordinates."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.x1 < self.x2 <= 1.0):
            raise ValueError(
                f"x1 < x2 violated or coordinate out of [0,1]: x1={self.x1}, x2={self.x2}"
            )
        if not (0.0 <= self.y1 < self.y2 <= 1.0):
            raise ValueError(
                f"y1 < y2 violated or coordinate out of [0,1]: y1={self.y1}, y2={self.y2}"
            )

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True, order=True)
class FrameKey:
    """The (video, keyframe second) pair that scopes grouping and pruning."""

    video_id: str
    timestamp: int

    def __post_init__(self) -> None:
        if not self.video_id:
            raise ValueError("video_id must be non-empty")
        if self.timestamp < 0:
            raise ValueError(f"timestamp must be >= 0, got {self.timestamp}")


@dataclass(frozen=True)
class Detection:
    """One detector output row: a scored person box with an action label."""

    key: FrameKey
    box: BoundingBox
    action_id: int
    score: float


@dataclass(frozen=True)
class GroundTruth:
    """One labeled instance: a person box with its true action label."""

    key: FrameKey
    box: BoundingBox
    action_id: int


class _FrameGroupedStore:
    """Shared mechanics: records sorted by (video_id, timestamp), stable within a frame."""

    __slots__ = ("_records", "_by_frame", "_class_set")

    def __init__(self, records: Iterable):
        ordered = sorted(records, key=lambda r: r.key)
        by_frame: dict[FrameKey, list] = {}
        classes: set[int] = set()
        for rec in ordered:
            by_frame.setdefault(rec.key, []).append(rec)
            classes.add(rec.action_id)
        self._records = tuple(ordered)
        self._by_frame = {key: tuple(rows) for key, rows in by_frame.items()}
        self._class_set = tuple(sorted(classes))

    @property
    def records(self) -> tuple:
        return self._records

    @property
    def class_set(self) -> tuple[int, ...]:
        return self._class_set

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator:
        return iter(self._records)

    def __eq__(self, other) -> bool:
        if not isinstance(other, type(self)):
            return NotImplemented
        return self._records == other._records

    def __hash__(self):
        return hash(self._records)

    def frames(self) -> tuple[FrameKey, ...]:
        return tuple(self._by_frame)

    def frame_items(self) -> Iterator[tuple[FrameKey, tuple]]:
        return iter(self._by_frame.items())

    def group(self, key: FrameKey) -> tuple:
        return self._by_frame.get(key, ())


class DetectionStore(_FrameGroupedStore):
    """Immutable, frame-grouped collection of detections."""

    __slots__ = ()

    @classmethod
    def from_records(cls, records: Iterable[Detection]) -> "DetectionStore":
        return cls(records)


class GroundTruthStore(_FrameGroupedStore):
    """Immutable, frame-grouped collection of ground-truth instances."""

    __slots__ = ("_match_index",)

    def __init__(self, records: Iterable[GroundTruth]):
        super().__init__(records)
        self._match_index = None

    @classmethod
    def from_records(cls, records: Iterable[GroundTruth]) -> "GroundTruthStore":
        return cls(records)

    def positives(self, action_id: int) -> int:
        """Number of labeled instances of ``action_id`` (the per-class M)."""
        counts, _ = self.matching_index()
        return counts.get(action_id, 0)

    def matching_index(self):
        """Cached (class -> count, class -> frame -> [(x1, y1, x2, y2, area), ...]).

        Built lazily on first use; the store is immutable so concurrent
        rebuilds are idempotent.
        """
        index = self._match_index
        if index is None:
            counts: dict[int, int] = {}
            slices: dict[int, dict[FrameKey, list[tuple]]] = {}
            for rec in self._records:
                counts[rec.action_id] = counts.get(rec.action_id, 0) + 1
                box = rec.box
                slices.setdefault(rec.action_id, {}).setdefault(rec.key, []).append(
                    (box.x1, box.y1, box.x2, box.y2, box.area)
                )
            index = (counts, slices)
            self._match_index = index
        return index


def _clamp01(value: float) -> float:
    return 0.0 if value < 0.0 else (1.0 if value > 1.0 else value)


def _parse_int(text: str, line_no: int, field: str, errors: list[str]) -> int | None:
    try:
        return int(text)
    except ValueError:
        errors.append(f"line {line_no}: field {field}: not an integer: {text!r}")
        return None


def _parse_float(text: str, line_no: int, field: str, errors: list[str]) -> float | None:
    try:
        return float(text)
    except ValueError:
        errors.append(f"line {line_no}: field {field}: not a number: {text!r}")
        return None


_COORD_FIELDS = ("x1", "y1", "x2", "y2")


def _parse_row_common(
    fields: Sequence[str], line_no: int, lenient: bool, errors: list[str]
) -> tuple[FrameKey, BoundingBox, int] | None:
    initial_errors = len(errors)

    video_id = fields[0]
    if not video_id:
        errors.append(f"line {line_no}: field video_id: must be non-empty")
    timestamp = _parse_int(fields[1], line_no, "timestamp", errors)
    if timestamp is not None and timestamp < 0:
        errors.append(f"line {line_no}: field timestamp: must be >= 0, got {timestamp}")

    coords: list[float] = []
    for name, raw in zip(_COORD_FIELDS, fields[2:6]):
        value = _parse_float(raw, line_no, name, errors)
        if value is None:
            continue
        if not (0.0 <= value <= 1.0):
            if lenient:
                clamped = _clamp01(value)
                logger.warning(
                    "line %d: field %s: %s out of [0,1], clamped to %s", line_no, name, value, clamped
                )
                value = clamped
            else:
                errors.append(f"line {line_no}: field {name}: {value} out of [0,1]")
                continue
        coords.append(value)

    action_id = _parse_int(fields[6], line_no, "action_id", errors)
    if action_id is not None and action_id < 1:
        errors.append(f"line {line_no}: field action_id: must be >= 1, got {action_id}")

    if len(errors) > initial_errors:
        return None

    try:
        box = BoundingBox(*coords)
    except ValueError as exc:
        errors.append(f"line {line_no}: field box: {exc}")
        return None
    return FrameKey(video_id, timestamp), box, action_id


def _read_rows(path: str | Path) -> list[tuple[int, list[str]]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise DataFormatError(str(path), [f"cannot read file: {exc}"]) from exc
    rows = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        rows.append((line_no, line.split(",")))
    return rows


def load_detections(path: str | Path, lenient: bool = False) -> DetectionStore:
    """Load an 8-column AVA-style detection CSV into an immutable store.

    ``lenient`` downgrades out-of-[0,1] coordinates to clamped values with a
    logged warning; every other violation is still a load error.
    """
    errors: list[str] = []
    records: list[Detection] = []
    for line_no, fields in _read_rows(path):
        if len(fields) != 8:
            errors.append(f"line {line_no}: wrong column count: expected 8, found {len(fields)}")
            continue
        common = _parse_row_common(fields, line_no, lenient, errors)
        score = _parse_float(fields[7], line_no, "score", errors)
        if score is not None and not (0.0 <= score <= 1.0):
            errors.append(f"line {line_no}: field score: {score} out of [0,1]")
            score = None
        if common is None or score is None:
            continue
        key, box, action_id = common
        records.append(Detection(key, box, action_id, score))
    if errors:
        raise DataFormatError(str(path), errors)
    return DetectionStore.from_records(records)


def load_ground_truth(
    path: str | Path, ignore_score_column: bool = False, lenient: bool = False
) -> GroundTruthStore:
    """Load a 7-column AVA-style ground-truth CSV into an immutable store.

    A trailing score column is accepted (and dropped) only when
    ``ignore_score_column`` is set. Duplicate (frame, box, action) rows are
    rejected, citing both line numbers.
    """
    errors: list[str] = []
    records: list[GroundTruth] = []
    seen: dict[tuple, int] = {}
    expected = 8 if ignore_score_column else 7
    for line_no, fields in _read_rows(path):
        if len(fields) not in (7, expected):
            errors.append(
                f"line {line_no}: wrong column count: expected {expected}, found {len(fields)}"
            )
            continue
        common = _parse_row_common(fields, line_no, lenient, errors)
        if common is None:
            continue
        key, box, action_id = common
        identity = (key, box, action_id)
        if identity in seen:
            errors.append(
                f"line {line_no}: duplicate ground-truth row, first seen at line {seen[identity]}"
            )
            continue
        seen[identity] = line_no
        records.append(GroundTruth(key, box, action_id))
    if errors:
        raise DataFormatError(str(path), errors)
    return GroundTruthStore.from_records(records)


def _format_box(box: BoundingBox) -> str:
    return f"{box.x1:.6f},{box.y1:.6f},{box.x2:.6f},{box.y2:.6f}"


def detections_csv_text(store: DetectionStore) -> str:
    lines = [
        f"{d.key.video_id},{d.key.timestamp},{_format_box(d.box)},{d.action_id},{d.score:.6f}"
        for d in store.records
    ]
    return "".join(line + "\n" for line in lines)


def ground_truth_csv_text(store: GroundTruthStore) -> str:
    lines = [
        f"{g.key.video_id},{g.key.timestamp},{_format_box(g.box)},{g.action_id}"
        for g in store.records
    ]
    return "".join(line + "\n" for line in lines)


def write_detections(store: DetectionStore, path: str | Path) -> None:
    """Serialize a store in the load dialect (atomic write)."""
    atomic_write_text(path, detections_csv_text(store))


def write_ground_truth(store: GroundTruthStore, path: str | Path) -> None:
    atomic_write_text(path, ground_truth_csv_text(store))
