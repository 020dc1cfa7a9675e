"""Pipeline stages: ingest -> align -> pair -> infer -> eval -> spectrum.

Every stage reads its inputs from the previous stage's artifacts, writes
deterministic outputs into its own subdirectory of `output_dir`, and drops
a provenance record (config hash, seed, versions). Reruns with identical
inputs and config produce byte-identical artifacts.
"""

from __future__ import annotations

import concurrent.futures
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import PipelineConfig, config_hash
from .errors import ConfigError, SolarSRError, StageError
from .fits_io import (
    Card,
    ImageSource,
    ObsMetadata,
    format_timestamp,
    parse_fits,
    parse_timestamp,
    read_image_hdu,
    write_fits,
)
from .image import Image2D, crop, shift_image
from .manifest import (
    FrameInfo,
    ManifestRecord,
    SplitBoundaries,
    make_splits,
    read_manifest,
    write_manifest,
)
from .metrics import aggregate_metrics, image_metrics
from .registration import align_sequence, coalign_pair, largest_valid_rect
from .resample import downsample_area, upsample_image
from .spectra import spectra_report
from .sr_engine import apply_generator, interpolate_checkpoints, load_checkpoint, save_checkpoint

STAGES = ("ingest", "align", "pair", "infer", "interp", "eval", "spectrum", "all")

_FITS_SUFFIXES = (".fits", ".fit", ".fts")

_CATALOG_COLUMNS = ("path", "timestamp", "plate_scale", "rotation_angle",
                    "width", "height")


def _out(config: PipelineConfig, *parts: str) -> Path:
    if not config.output_dir:
        raise ConfigError("output_dir must be set")
    path = Path(config.output_dir).joinpath(*parts)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_provenance(config: PipelineConfig, stage: str):
    record = {
        "stage": stage,
        "config_sha256": config_hash(config),
        "seed": config.seed,
        "versions": {
            "solarsr": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    path = _out(config, stage if stage != "ingest" else "ingest", "provenance.json")
    path.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")


def _list_fits(directory: str) -> list[Path]:
    root = Path(directory)
    if not root.is_dir():
        raise ConfigError(f"input directory not found: {directory}")
    files = sorted(p for p in root.iterdir()
                   if p.suffix.lower() in _FITS_SUFFIXES and p.is_file())
    if not files:
        raise ConfigError(f"no FITS files in {directory}")
    return files


def _read_frame(config: PipelineConfig, path: Path, source: ImageSource):
    file = parse_fits(path.read_bytes())
    return read_image_hdu(
        file,
        timestamp_keyword=config.timestamp_keyword,
        rotation_keyword=config.rotation_keyword if source is ImageSource.HR_GST else None,
        plate_scale_keyword=config.plate_scale_keyword,
        source=source,
        strict=True,
        check_plate_scale=config.plate_scale_check,
    )


def _standard_cards(meta: ObsMetadata) -> list[Card]:
    cards = []
    if meta.timestamp is not None:
        cards.append(Card.make("DATE-OBS", format_timestamp(meta.timestamp)))
    cards.append(Card.make("CDELT1", meta.plate_scale, "arcsec per pixel"))
    cards.append(Card.make("CDELT2", meta.plate_scale, "arcsec per pixel"))
    return cards


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def _write_catalog(path: Path, rows: list[dict]):
    lines = ["\t".join(_CATALOG_COLUMNS)]
    for row in rows:
        lines.append("\t".join(str(row[c]) for c in _CATALOG_COLUMNS))
    path.write_text("\n".join(lines) + "\n")


def _read_catalog(path: Path) -> list[dict]:
    if not path.is_file():
        raise StageError(f"missing catalog {path}; run the ingest stage first")
    lines = path.read_text().splitlines()
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split("\t")
        row = dict(zip(_CATALOG_COLUMNS, parts))
        row["plate_scale"] = float(row["plate_scale"])
        row["rotation_angle"] = float(row["rotation_angle"])
        row["width"] = int(row["width"])
        row["height"] = int(row["height"])
        rows.append(row)
    return rows


def stage_ingest(config: PipelineConfig):
    """Catalog LR and HR inputs: path, timestamp, plate scale, rotation."""
    for source, key, directory in (
        (ImageSource.LR_GONG, "lr", config.lr_dir),
        (ImageSource.HR_GST, "hr", config.hr_dir),
    ):
        rows = []
        for path in _list_fits(directory):
            try:
                image, meta = _read_frame(config, path, source)
            except SolarSRError as exc:
                raise StageError(f"{path}: {exc}", stage="ingest") from exc
            rows.append({
                "path": str(path),
                "timestamp": format_timestamp(meta.timestamp),
                "plate_scale": repr(meta.plate_scale),
                "rotation_angle": repr(meta.rotation_angle),
                "width": image.width,
                "height": image.height,
            })
        rows.sort(key=lambda r: (r["timestamp"], r["path"]))
        _write_catalog(_out(config, "ingest", f"{key}_catalog.tsv"), rows)
    _write_provenance(config, "ingest")


# ---------------------------------------------------------------------------
# align
# ---------------------------------------------------------------------------

def stage_align(config: PipelineConfig):
    """Temporally align the LR sequence; write shifted frames + report."""
    rows = _read_catalog(_out(config, "ingest", "lr_catalog.tsv"))
    frames = []
    metas = []
    cards = []
    for row in rows:
        path = Path(row["path"])
        image, meta = _read_frame(config, path, ImageSource.LR_GONG)
        frames.append(image)
        metas.append(meta)
        cards.append(_standard_cards(meta))
    try:
        shifts = align_sequence(frames, max_shift=config.max_shift,
                                passes=config.align_passes)
    except SolarSRError as exc:
        raise StageError(f"temporal alignment failed: {exc}", stage="align") from exc

    report = ["index\tpath\taligned_path\tdx\tdy\tscore"]
    for i, (row, shift) in enumerate(zip(rows, shifts)):
        aligned = shift_image(frames[i], -shift.dx, -shift.dy)
        name = Path(row["path"]).stem + "_aligned.fits"
        out_path = _out(config, "align", name)
        out_path.write_bytes(write_fits(aligned, cards[i], bitpix=-64))
        report.append(
            f"{i}\t{row['path']}\t{out_path}\t{shift.dx}\t{shift.dy}\t{shift.score!r}"
        )
    _out(config, "align", "alignment_report.tsv").write_text("\n".join(report) + "\n")
    _write_provenance(config, "align")


def _aligned_path(config: PipelineConfig, lr_path: str) -> Path:
    return _out(config, "align", Path(lr_path).stem + "_aligned.fits")


# ---------------------------------------------------------------------------
# pair
# ---------------------------------------------------------------------------

def _coalign_one(args):
    """Worker: co-align one record; writes the pair artifacts."""
    config, record = args
    lr_file = _aligned_path(config, record.lr_path)
    if not lr_file.is_file():
        raise StageError(f"missing aligned frame {lr_file}; run align first",
                         stage="pair", pair_id=record.pair_id)
    lr_img, lr_meta = read_image_hdu(
        parse_fits(lr_file.read_bytes()),
        timestamp_keyword="DATE-OBS",
        plate_scale_keyword=config.plate_scale_keyword,
        source=ImageSource.LR_GONG,
        check_plate_scale=config.plate_scale_check,
    )
    hr_img, hr_meta = _read_frame(config, Path(record.hr_path), ImageSource.HR_GST)
    pair = coalign_pair(
        lr_img, lr_meta, hr_img, hr_meta,
        manual_offset=(config.manual_offset_dx, config.manual_offset_dy),
        match_ratio=config.match_ratio,
        inlier_tol=config.ransac_inlier_tol,
        ransac_iterations=config.ransac_iterations,
        seed=config.seed,
        residual_floor=config.residual_floor,
        detect_kwargs={
            "contrast_threshold": config.sift_contrast_threshold,
            "edge_ratio": config.sift_edge_ratio,
        },
    )
    lr_out = _out(config, "pairs", f"{record.pair_id}_lr.fits")
    hr_out = _out(config, "pairs", f"{record.pair_id}_hr.fits")
    lr_out.write_bytes(write_fits(pair.lr, _standard_cards(pair.lr_meta), bitpix=-64))
    hr_out.write_bytes(write_fits(pair.hr, _standard_cards(pair.hr_meta), bitpix=-64))
    return ManifestRecord(
        pair_id=record.pair_id,
        split=record.split,
        lr_path=str(lr_out),
        hr_path=str(hr_out),
        timestamp_lr=record.timestamp_lr,
        timestamp_hr=record.timestamp_hr,
        scale=pair.transform.scale,
        rotation_deg=pair.transform.rotation_deg,
        tx=pair.transform.tx,
        ty=pair.transform.ty,
        residual_score=pair.residual_score,
    )


def _extend_one(config: PipelineConfig, record: ManifestRecord) -> ManifestRecord:
    lr_file = _aligned_path(config, record.lr_path)
    lr_img, lr_meta = read_image_hdu(
        parse_fits(lr_file.read_bytes()),
        source=ImageSource.LR_GONG,
        check_plate_scale=config.plate_scale_check,
    )
    rect = largest_valid_rect(lr_img)
    lr_crop = crop(lr_img, rect)
    out_path = _out(config, "pairs", f"{record.pair_id}_lr.fits")
    out_path.write_bytes(write_fits(lr_crop, _standard_cards(lr_meta), bitpix=-64))
    return ManifestRecord(
        pair_id=record.pair_id,
        split="extended",
        lr_path=str(out_path),
        timestamp_lr=record.timestamp_lr,
    )


def stage_pair(config: PipelineConfig):
    """Build the split manifest and co-align every LR/HR pair."""
    if not (config.split_train_start and config.split_train_end
            and config.split_test_end):
        raise ConfigError("split_train_start/split_train_end/split_test_end "
                          "must be set for the pair stage")
    boundaries = SplitBoundaries(
        parse_timestamp(config.split_train_start),
        parse_timestamp(config.split_train_end),
        parse_timestamp(config.split_test_end),
    )
    lr_rows = _read_catalog(_out(config, "ingest", "lr_catalog.tsv"))
    hr_rows = _read_catalog(_out(config, "ingest", "hr_catalog.tsv"))
    lr_frames = [FrameInfo(r["path"], parse_timestamp(r["timestamp"])) for r in lr_rows]
    hr_frames = [FrameInfo(r["path"], parse_timestamp(r["timestamp"])) for r in hr_rows]
    records, warnings = make_splits(lr_frames, hr_frames, boundaries,
                                    max_gap_seconds=config.max_pair_gap_seconds)

    paired = [r for r in records if r.split in ("train", "test")]
    extended = [r for r in records if r.split == "extended"]

    results: dict[str, ManifestRecord] = {}
    jobs = [(config, record) for record in paired]
    if config.workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(config.workers) as pool:
            for rec in pool.map(_coalign_one, jobs):
                results[rec.pair_id] = rec
    else:
        for job in jobs:
            try:
                rec = _coalign_one(job)
            except SolarSRError as exc:
                raise StageError(f"{job[1].pair_id}: {exc}", stage="pair",
                                 pair_id=job[1].pair_id) from exc
            results[rec.pair_id] = rec
    for record in extended:
        results[record.pair_id] = _extend_one(config, record)

    ordered = [results[r.pair_id] for r in records if r.pair_id in results]
    write_manifest(ordered, _out(config, "pairs", "manifest.tsv"))
    _out(config, "pairs", "warnings.txt").write_text(
        "".join(w + "\n" for w in warnings)
    )
    _write_provenance(config, "pair")


# ---------------------------------------------------------------------------
# infer / interp
# ---------------------------------------------------------------------------

def _resolve_checkpoint_path(config: PipelineConfig) -> Path:
    interp_path = _out(config, "checkpoints", "interp.ckpt")
    if config.checkpoint:
        return Path(config.checkpoint)
    if interp_path.is_file():
        return interp_path
    raise ConfigError("checkpoint must be set (or run the interp stage first)")


def _infer_one(args):
    config, record, ckpt_path = args
    ckpt = load_checkpoint(Path(ckpt_path).read_bytes())
    lr_file = Path(record.lr_path)
    lr_img, lr_meta = read_image_hdu(
        parse_fits(lr_file.read_bytes()),
        source=ImageSource.LR_GONG,
        check_plate_scale=config.plate_scale_check,
    )
    if not lr_img.all_valid():
        rect = largest_valid_rect(lr_img)
        lr_img = crop(lr_img, rect)
    sr = apply_generator(
        lr_img, ckpt, config.normalization_max,
        tile=config.tile_size or None,
        tile_overlap=config.tile_overlap,
    )
    s = ckpt.config.scale_factor
    sr_meta = ObsMetadata(lr_meta.timestamp, lr_meta.plate_scale / s, 0.0,
                          lr_meta.source)
    out_path = _out(config, "sr", f"{record.pair_id}_sr.fits")
    out_path.write_bytes(write_fits(sr, _standard_cards(sr_meta), bitpix=-64))
    return record.pair_id, str(out_path)


def stage_infer(config: PipelineConfig):
    """Super-resolve every manifest LR frame with the configured checkpoint."""
    # fail-fast configuration checks before touching any image
    ckpt_path = _resolve_checkpoint_path(config)
    if not ckpt_path.is_file():
        raise ConfigError(f"checkpoint file not found: {ckpt_path}")
    if config.normalization_max <= 0:
        raise ConfigError("normalization_max must be set > 0 for infer")
    ckpt = load_checkpoint(ckpt_path.read_bytes())
    ckpt.validate()
    if config.scale_factor and ckpt.config.scale_factor != config.scale_factor:
        raise ConfigError(
            f"config scale_factor {config.scale_factor} != checkpoint "
            f"scale_factor {ckpt.config.scale_factor}"
        )
    manifest_path = _out(config, "pairs", "manifest.tsv")
    if not manifest_path.is_file():
        raise StageError("missing pairs/manifest.tsv; run the pair stage first",
                         stage="infer")
    records = read_manifest(manifest_path)

    jobs = [(config, r, str(ckpt_path)) for r in records]
    outputs = {}
    if config.workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(config.workers) as pool:
            for pair_id, path in pool.map(_infer_one, jobs):
                outputs[pair_id] = path
    else:
        for job in jobs:
            try:
                pair_id, path = _infer_one(job)
            except SolarSRError as exc:
                raise StageError(f"{job[1].pair_id}: {exc}", stage="infer",
                                 pair_id=job[1].pair_id) from exc
            outputs[pair_id] = path
    lines = ["pair_id\tsr_path"]
    for record in records:
        lines.append(f"{record.pair_id}\t{outputs[record.pair_id]}")
    _out(config, "sr", "outputs.tsv").write_text("\n".join(lines) + "\n")
    _write_provenance(config, "infer")


def stage_interp(config: PipelineConfig, alpha: float | None = None):
    """Blend the PSNR- and GAN-trained checkpoints into one."""
    if not (config.checkpoint_psnr and config.checkpoint_gan):
        raise ConfigError("checkpoint_psnr and checkpoint_gan must be set")
    for path in (config.checkpoint_psnr, config.checkpoint_gan):
        if not Path(path).is_file():
            raise ConfigError(f"checkpoint file not found: {path}")
    blend = config.alpha if alpha is None else float(alpha)
    psnr = load_checkpoint(Path(config.checkpoint_psnr).read_bytes())
    gan = load_checkpoint(Path(config.checkpoint_gan).read_bytes())
    merged = interpolate_checkpoints(psnr, gan, blend)
    out_path = _out(config, "checkpoints", "interp.ckpt")
    out_path.write_bytes(save_checkpoint(merged))
    _write_provenance(config, "interp")
    return out_path


# ---------------------------------------------------------------------------
# eval / spectrum
# ---------------------------------------------------------------------------

def _match_truth_to_sr(truth: Image2D, sr_shape: tuple[int, int],
                       mode: str) -> Image2D:
    if truth.shape == sr_shape:
        return truth
    if mode != "bicubic":
        raise StageError(
            f"truth {truth.shape} != SR {sr_shape}; set eval_resample=bicubic "
            "or match scale_factor to the plate-scale ratio"
        )
    th, tw = truth.shape
    sh, sw = sr_shape
    if th >= sh:
        factor = th / sh
        if abs(factor - tw / sw) > 1e-9:
            raise StageError(f"anisotropic eval resample {truth.shape}->{sr_shape}")
        return downsample_area(truth, factor)
    if sh % th == 0 and sw % tw == 0 and sh // th == sw // tw:
        return upsample_image(truth, sh // th, method="bicubic")
    raise StageError(f"cannot resample truth {truth.shape} to SR {sr_shape}")


def stage_eval(config: PipelineConfig):
    """MSE/RMSE/CC of SR outputs against HR ground truth on the test split."""
    records = read_manifest(_out(config, "pairs", "manifest.tsv"))
    test_records = [r for r in records if r.split == "test"]
    if not test_records:
        raise StageError("no test-split records to evaluate", stage="eval")
    per_image = []
    rows = ["pair_id\tmse\trmse\tcc"]
    for record in test_records:
        sr_path = _out(config, "sr", f"{record.pair_id}_sr.fits")
        if not sr_path.is_file():
            raise StageError(f"missing SR output {sr_path}; run infer first",
                             stage="eval", pair_id=record.pair_id)
        sr_img, _ = read_image_hdu(parse_fits(sr_path.read_bytes()),
                                   source=ImageSource.LR_GONG,
                                   check_plate_scale=False)
        truth_img, _ = read_image_hdu(parse_fits(Path(record.hr_path).read_bytes()),
                                      source=ImageSource.HR_GST,
                                      check_plate_scale=False)
        truth_img = _match_truth_to_sr(truth_img, sr_img.shape, config.eval_resample)
        m = image_metrics(sr_img, truth_img)
        per_image.append(m)
        rows.append(f"{record.pair_id}\t{m.mse!r}\t{m.rmse!r}\t{m.cc!r}")
    report = aggregate_metrics(per_image)
    rows.append(f"aggregate\t{report.mean_mse!r}\t{report.mean_rmse!r}\t{report.mean_cc!r}")
    _out(config, "eval", "metrics.tsv").write_text("\n".join(rows) + "\n")
    _write_provenance(config, "eval")
    return report


def stage_spectrum(config: PipelineConfig):
    """Radial power-spectrum comparison of each SR output vs its LR input."""
    records = read_manifest(_out(config, "pairs", "manifest.tsv"))
    wrote_any = False
    for record in records:
        sr_path = _out(config, "sr", f"{record.pair_id}_sr.fits")
        if not sr_path.is_file():
            raise StageError(f"missing SR output {sr_path}; run infer first",
                             stage="spectrum", pair_id=record.pair_id)
        sr_img, _ = read_image_hdu(parse_fits(sr_path.read_bytes()),
                                   source=ImageSource.LR_GONG,
                                   check_plate_scale=False)
        lr_img, _ = read_image_hdu(parse_fits(Path(record.lr_path).read_bytes()),
                                   source=ImageSource.LR_GONG,
                                   check_plate_scale=False)
        report = spectra_report(sr_img, lr_img, upscale=config.spectra_upscale,
                                window=config.spectra_window)
        lines = [
            "high_freq_ratio\t" + repr(report.high_freq_ratio)
            + f"\tupscale\t{report.upscale_method}"
            + f"\twindow\t{config.spectra_window}"
            + f"\tfactor\t{report.upscale_factor}",
            "bin_center\tsr_power\tlr_power",
        ]
        for b, sp, lp in zip(report.bins, report.sr_power, report.lr_power):
            lines.append(f"{float(b)!r}\t{float(sp)!r}\t{float(lp)!r}")
        _out(config, "spectra", f"{record.pair_id}.tsv").write_text(
            "\n".join(lines) + "\n"
        )
        wrote_any = True
    if not wrote_any:
        raise StageError("no records with SR outputs", stage="spectrum")
    _write_provenance(config, "spectrum")


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def run_stage(config: PipelineConfig, stage: str, alpha: float | None = None):
    if stage not in STAGES:
        raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGES}")
    if stage == "all":
        stage_ingest(config)
        stage_align(config)
        stage_pair(config)
        if config.checkpoint_psnr and config.checkpoint_gan:
            stage_interp(config, alpha)
        stage_infer(config)
        stage_eval(config)
        stage_spectrum(config)
        return
    dispatch = {
        "ingest": stage_ingest,
        "align": stage_align,
        "pair": stage_pair,
        "infer": stage_infer,
        "eval": stage_eval,
        "spectrum": stage_spectrum,
    }
    if stage == "interp":
        stage_interp(config, alpha)
    else:
        dispatch[stage](config)
