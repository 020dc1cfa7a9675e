"""Split construction and manifest serialization."""

from datetime import datetime, timezone

import pytest

from solarsr.errors import EmptyInputs
from solarsr.manifest import (
    FrameInfo,
    ManifestRecord,
    SplitBoundaries,
    make_splits,
    read_manifest,
    write_manifest,
)


def ts(h, m, s=0, day=31):
    return datetime(2023, 8, day, h, m, s, tzinfo=timezone.utc)


BOUNDS = SplitBoundaries(ts(16, 35), ts(21, 35), ts(22, 35))


class TestMakeSplits:
    def test_nearest_lr_frame_wins(self):
        lr = [FrameInfo("lr1", ts(11, 59, 58, day=1)),
              FrameInfo("lr2", ts(12, 0, 30, day=1))]
        hr = [FrameInfo("hr1", ts(12, 0, 0, day=1))]
        bounds = SplitBoundaries(ts(11, 0, day=1), ts(13, 0, day=1), ts(14, 0, day=1))
        records, warnings = make_splits(lr, hr, bounds)
        paired = [r for r in records if r.split != "extended"]
        assert len(paired) == 1
        assert paired[0].lr_path == "lr1"  # closer by 2 s vs 30 s
        assert not warnings

    def test_boundary_timestamp_goes_to_test(self):
        lr = [FrameInfo("lr1", ts(21, 35))]
        hr = [FrameInfo("hr1", ts(21, 35))]  # exactly train_end
        records, _ = make_splits(lr, hr, BOUNDS)
        assert records[0].split == "test"

    def test_train_window_half_open(self):
        lr = [FrameInfo("lr1", ts(16, 35)), FrameInfo("lr2", ts(21, 34, 59))]
        hr = [FrameInfo("hr1", ts(16, 35)), FrameInfo("hr2", ts(21, 34, 59))]
        records, _ = make_splits(lr, hr, BOUNDS)
        assert [r.split for r in records] == ["train", "train"]

    def test_extended_frames_after_hr_coverage(self):
        lr = [FrameInfo("lr1", ts(21, 40)), FrameInfo("lr2", ts(22, 36)),
              FrameInfo("lr3", ts(23, 59))]
        hr = [FrameInfo("hr1", ts(21, 40))]
        records, _ = make_splits(lr, hr, BOUNDS)
        splits = {r.lr_path: r.split for r in records}
        assert splits == {"lr1": "test", "lr2": "extended", "lr3": "extended"}
        ext = [r for r in records if r.split == "extended"]
        assert all(r.hr_path == "" for r in ext)

    def test_identical_distance_conflict_resolved_to_earlier_hr(self):
        lr = [FrameInfo("lrA", ts(17, 0)), FrameInfo("lrB", ts(17, 2))]
        # both HR frames are 30 s from lrA; the earlier keeps it
        hr = [FrameInfo("hr1", ts(16, 59, 30)), FrameInfo("hr2", ts(17, 0, 30))]
        records, warnings = make_splits(lr, hr, BOUNDS, max_gap_seconds=120)
        paired = {r.hr_path: r.lr_path for r in records if r.split != "extended"}
        assert paired["hr1"] == "lrA"
        assert paired["hr2"] == "lrB"  # bumped to its next nearest
        assert any("identical distance" in w for w in warnings)

    def test_gap_limit_skips_unmatched_hr(self):
        lr = [FrameInfo("lr1", ts(16, 35))]
        hr = [FrameInfo("hr1", ts(16, 35)), FrameInfo("hr2", ts(18, 0))]
        records, warnings = make_splits(lr, hr, BOUNDS, max_gap_seconds=60)
        assert len([r for r in records if r.split != "extended"]) == 1
        assert any("no LR frame within" in w for w in warnings)

    def test_hr_outside_windows_warned(self):
        lr = [FrameInfo("lr1", ts(23, 0))]
        hr = [FrameInfo("hr1", ts(23, 0))]
        records, warnings = make_splits(lr, hr, BOUNDS)
        assert not [r for r in records if r.split != "extended"]
        assert any("outside every split window" in w for w in warnings)

    def test_empty_inputs(self):
        with pytest.raises(EmptyInputs):
            make_splits([], [FrameInfo("hr1", ts(17, 0))], BOUNDS)
        with pytest.raises(EmptyInputs):
            make_splits([FrameInfo("lr1", ts(17, 0))], [], BOUNDS)

    def test_pair_ids_unique_and_ordered(self):
        lr = [FrameInfo(f"lr{i}", ts(17, i)) for i in range(10)]
        hr = [FrameInfo(f"hr{i}", ts(17, i, 2)) for i in range(5)]
        records, _ = make_splits(lr, hr, BOUNDS)
        ids = [r.pair_id for r in records]
        assert len(ids) == len(set(ids))
        paired_ids = [r.pair_id for r in records if r.split != "extended"]
        assert paired_ids == sorted(paired_ids)


class TestManifestIO:
    def test_round_trip(self, tmp_path):
        records = [
            ManifestRecord("pair-0001", "train", "a.fits", "b.fits",
                           "2023-08-31T16:35:00", "2023-08-31T16:35:02",
                           scale=0.5, rotation_deg=-3.25, tx=1.5, ty=-2.0,
                           residual_score=0.97),
            ManifestRecord("ext-0001", "extended", "c.fits",
                           timestamp_lr="2023-08-31T23:00:00"),
        ]
        path = tmp_path / "manifest.tsv"
        write_manifest(records, path)
        back = read_manifest(path)
        assert back == records

    def test_duplicate_ids_rejected(self, tmp_path):
        rec = ManifestRecord("p1", "extended", "a.fits")
        with pytest.raises(ValueError, match="duplicate"):
            write_manifest([rec, rec], tmp_path / "m.tsv")

    def test_split_constraints(self):
        with pytest.raises(ValueError):
            ManifestRecord("p1", "train", "a.fits")  # train needs hr_path
        with pytest.raises(ValueError):
            ManifestRecord("p1", "extended", "a.fits", hr_path="b.fits")
        with pytest.raises(ValueError):
            ManifestRecord("p1", "weird", "a.fits")
