"""Pair manifests: tab-separated records with a fixed column order.

Columns: pair_id, split, lr_path, hr_path, timestamp_lr, timestamp_hr,
scale, rotation_deg, tx, ty, residual_score. Empty string marks a field
that does not apply (extended records have no HR side and no transform).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .errors import EmptyInputs
from .fits_io import format_timestamp

COLUMNS = (
    "pair_id", "split", "lr_path", "hr_path", "timestamp_lr", "timestamp_hr",
    "scale", "rotation_deg", "tx", "ty", "residual_score",
)

SPLITS = ("train", "test", "extended")


@dataclass
class ManifestRecord:
    pair_id: str
    split: str
    lr_path: str
    hr_path: str = ""
    timestamp_lr: str = ""
    timestamp_hr: str = ""
    scale: float | None = None
    rotation_deg: float | None = None
    tx: float | None = None
    ty: float | None = None
    residual_score: float | None = None

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if self.split in ("train", "test") and not self.hr_path:
            raise ValueError(f"{self.split} record {self.pair_id} needs hr_path")
        if self.split == "extended" and self.hr_path:
            raise ValueError(f"extended record {self.pair_id} must not have hr_path")


def _format_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_manifest(records: list[ManifestRecord], path: str | Path):
    seen = set()
    for r in records:
        if r.pair_id in seen:
            raise ValueError(f"duplicate pair_id {r.pair_id}")
        seen.add(r.pair_id)
    lines = ["\t".join(COLUMNS)]
    for r in records:
        lines.append("\t".join(_format_field(getattr(r, c)) for c in COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> list[ManifestRecord]:
    lines = Path(path).read_text().splitlines()
    if not lines or tuple(lines[0].split("\t")) != COLUMNS:
        raise ValueError(f"manifest {path} has an unexpected header")
    records = []
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != len(COLUMNS):
            raise ValueError(f"manifest row has {len(parts)} fields: {line!r}")
        kwargs: dict = dict(zip(COLUMNS, parts))
        for key in ("scale", "rotation_deg", "tx", "ty", "residual_score"):
            kwargs[key] = float(kwargs[key]) if kwargs[key] else None
        records.append(ManifestRecord(**kwargs))
    return records


# ---------------------------------------------------------------------------
# split construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrameInfo:
    path: str
    timestamp: datetime


@dataclass(frozen=True)
class SplitBoundaries:
    """Half-open windows: train = [train_start, train_end),
    test = [train_end, test_end)."""

    train_start: datetime
    train_end: datetime
    test_end: datetime

    def __post_init__(self):
        if not self.train_start < self.train_end < self.test_end:
            raise ValueError("boundaries must be strictly increasing")

    def split_of(self, ts: datetime) -> str | None:
        if self.train_start <= ts < self.train_end:
            return "train"
        if self.train_end <= ts < self.test_end:
            return "test"
        return None


def make_splits(
    lr_frames: list[FrameInfo],
    hr_frames: list[FrameInfo],
    boundaries: SplitBoundaries,
    max_gap_seconds: float = 60.0,
) -> tuple[list[ManifestRecord], list[str]]:
    """Pair each HR frame with its closest-in-time LR frame and assign splits.

    LR frames later than the last HR frame become `extended` records.
    Returns (records, warnings). A warning is emitted when two HR frames
    claim the same LR frame at identical time distance (the earlier HR frame
    keeps it), when an HR frame has no LR frame within the gap limit, and
    when an HR frame falls outside every split window.
    """
    if not lr_frames or not hr_frames:
        raise EmptyInputs("both LR and HR frame lists must be non-empty")
    lr_sorted = sorted(lr_frames, key=lambda f: (f.timestamp, f.path))
    hr_sorted = sorted(hr_frames, key=lambda f: (f.timestamp, f.path))
    warnings: list[str] = []
    records: list[ManifestRecord] = []

    claimed: dict[str, tuple[datetime, float]] = {}  # lr path -> (hr ts, distance)
    pair_no = 0
    for hr in hr_sorted:
        split = boundaries.split_of(hr.timestamp)
        if split is None:
            warnings.append(
                f"hr frame {hr.path} at {format_timestamp(hr.timestamp)} "
                f"is outside every split window; skipped"
            )
            continue
        # candidates ordered by (distance, earlier timestamp) for determinism
        ranked = sorted(
            lr_sorted,
            key=lambda lr: (abs((lr.timestamp - hr.timestamp).total_seconds()),
                            lr.timestamp, lr.path),
        )
        chosen = None
        for lr in ranked:
            distance = abs((lr.timestamp - hr.timestamp).total_seconds())
            if distance > max_gap_seconds:
                break
            prior = claimed.get(lr.path)
            if prior is not None and prior[1] == distance:
                warnings.append(
                    f"lr frame {lr.path} claimed by two hr frames at identical "
                    f"distance {distance:.3f}s; kept the earlier hr frame"
                )
                continue
            chosen = lr
            break
        if chosen is None:
            warnings.append(
                f"hr frame {hr.path} has no LR frame within "
                f"{max_gap_seconds}s; skipped"
            )
            continue
        dist = abs((chosen.timestamp - hr.timestamp).total_seconds())
        claimed.setdefault(chosen.path, (hr.timestamp, dist))
        pair_no += 1
        records.append(ManifestRecord(
            pair_id=f"pair-{pair_no:04d}",
            split=split,
            lr_path=chosen.path,
            hr_path=hr.path,
            timestamp_lr=format_timestamp(chosen.timestamp),
            timestamp_hr=format_timestamp(hr.timestamp),
        ))

    last_hr = max(f.timestamp for f in hr_sorted)
    ext_no = 0
    for lr in lr_sorted:
        if lr.timestamp > last_hr:
            ext_no += 1
            records.append(ManifestRecord(
                pair_id=f"ext-{ext_no:04d}",
                split="extended",
                lr_path=lr.path,
                timestamp_lr=format_timestamp(lr.timestamp),
            ))
    return records, warnings
