"""Command-line driver: score | transmit | receive | evaluate | sweep | pipeline.

Exit codes: 0 success, 2 bad input, 3 format error, 4 capacity error.
A flat key-value config file (--config, lines of `flag-name = value`) supplies
defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import pipeline as pl
from .allocation import (
    AllocationPlan,
    PatchGrid,
    RateTable,
    allocate,
    budget_from_fraction,
    patch_scores,
    plan_stats,
    uniform_plan,
)
from .codec import EncodedFrame, decode_frame, encode_frame
from .errors import CapacityError, FormatError
from .fusion import RelevanceMap
from .metrics import BinaryMask, masked_mse, psnr, relevance_l1
from .svgplot import write_line_plot
from .tensors import (
    RasterImage,
    Tensor,
    TensorArchive,
    load_archive,
    load_pgm,
    load_ppm,
    save_archive,
    save_pgm,
    save_ppm,
)
from .toy import toy_relevance
from .transport import ChannelConfig, transmit

DEFAULT_SWEEP_RATES = tuple(range(0, 101, 5))
METRIC_COLUMNS = ("masked_mse", "relevance_l1", "embedding_cosine", "psnr")


@dataclass
class PipelineConfig:
    image: Optional[Path] = None
    archive: Optional[Path] = None
    mask: Optional[Path] = None
    recon_archive: Optional[Path] = None
    recon: Optional[Path] = None
    frame: Optional[Path] = None
    corpus: Optional[Path] = None
    out_dir: Path = Path("out")
    rate: Optional[Fraction] = None
    budget: Optional[int] = None
    patch_size: int = 8
    rates: RateTable = field(default_factory=RateTable)
    toy: bool = False
    blur_radius: int = 0
    heatmap: bool = False
    sweep_rates: tuple[int, ...] = DEFAULT_SWEEP_RATES
    uniform_level: Optional[int] = None
    image_id: Optional[str] = None


def parse_rate(text: str) -> Fraction:
    """Channel rate as a fraction: '0.5', '1/2', or '50%'."""
    text = text.strip()
    frac = Fraction(text[:-1]) / 100 if text.endswith("%") else Fraction(text)
    if frac < 0 or frac > 1:
        raise ValueError(f"rate {text!r} outside [0, 1]")
    return frac


def parse_rate_table(text: str) -> RateTable:
    return RateTable(tuple(int(v) for v in text.split(",")))


def parse_sweep_rates(text: str) -> tuple[int, ...]:
    vals = tuple(int(v) for v in text.split(","))
    if any(not 0 <= v <= 100 for v in vals):
        raise ValueError("sweep rates are percentages in [0, 100]")
    return vals


def read_config_file(path: Path) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected `key = value`")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


_BOOL_KEYS = {"toy", "heatmap"}
_PATH_KEYS = {"image", "archive", "mask", "recon-archive", "recon", "frame", "corpus", "out-dir"}


def build_config(args: argparse.Namespace) -> PipelineConfig:
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(key: str):
        attr = key.replace("-", "_")
        cli_val = getattr(args, attr, None)
        if cli_val is not None and cli_val is not False:
            return cli_val
        if key in file_values:
            raw = file_values[key]
            if key in _BOOL_KEYS:
                return raw.lower() in ("1", "true", "yes", "on")
            if key in _PATH_KEYS:
                return Path(raw)
            if key == "rate":
                return parse_rate(raw)
            if key == "rates":
                return parse_rate_table(raw)
            if key == "sweep-rates":
                return parse_sweep_rates(raw)
            if key in ("budget", "patch-size", "blur-radius", "uniform-level"):
                return int(raw)
            return raw
        return cli_val  # None or False

    cfg = PipelineConfig()
    for key in (
        "image", "archive", "mask", "recon-archive", "recon", "frame", "corpus",
        "out-dir", "rate", "budget", "patch-size", "rates", "toy", "blur-radius",
        "heatmap", "sweep-rates", "uniform-level", "image-id",
    ):
        value = pick(key)
        if value is not None:
            setattr(cfg, key.replace("-", "_"), value)
    return cfg


# --------------------------------------------------------------- primitives


def relevance_for(cfg: PipelineConfig, image: Optional[RasterImage]) -> RelevanceMap:
    """Normalized relevance map from the configured source (toy mask or archive)."""
    if cfg.toy:
        if cfg.mask is None:
            raise ValueError("toy scorer needs --mask")
        return toy_relevance(load_pgm(cfg.mask), cfg.blur_radius)
    if cfg.archive is None:
        raise ValueError("scoring needs --archive, or --toy with --mask")
    archive = load_archive(cfg.archive)
    dims = (image.height, image.width) if image is not None else (None, None)
    return pl.relevance_from_archive(archive, *dims).map


def plan_for(cfg: PipelineConfig, image: RasterImage, rel: RelevanceMap) -> AllocationPlan:
    from .codec import PATCH_SIZE

    if cfg.patch_size != PATCH_SIZE:
        raise ValueError(f"the patch codecs support {PATCH_SIZE}px patches only")
    grid = PatchGrid.for_image(image.height, image.width, cfg.patch_size)
    if cfg.rate is None and cfg.budget is None and cfg.uniform_level is None:
        raise ValueError("need --rate or --budget")
    budget = (
        cfg.budget
        if cfg.budget is not None
        else budget_from_fraction(cfg.rate, grid.patch_count, cfg.rates.max_rate)
        if cfg.rate is not None
        else None
    )
    if cfg.uniform_level is not None:
        return uniform_plan(grid, cfg.rates, cfg.uniform_level, budget=budget)
    return allocate(patch_scores(rel, grid), cfg.rates, budget)


def write_plan_report(path: Path, plan: AllocationPlan) -> None:
    stats = plan_stats(plan)
    lines = [
        f"patches {plan.patch_count}",
        f"budget {plan.budget}",
        f"payload {plan.total}",
        f"utilization {stats.utilization:.6f}",
    ]
    lines += [
        f"level {lvl} rate {rate} count {count}"
        for lvl, (rate, count) in enumerate(zip(plan.table.rates, stats.counts))
    ]
    path.write_text("\n".join(lines) + "\n")


def heatmap_bytes(rel: RelevanceMap) -> np.ndarray:
    return np.clip(np.rint(rel.values * 255.0), 0, 255).astype(np.uint8)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


# -------------------------------------------------------------- subcommands


def cmd_score(cfg: PipelineConfig) -> int:
    image = load_ppm(cfg.image) if cfg.image else None
    rel = relevance_for(cfg, image)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    save_archive(TensorArchive([Tensor(pl.S_INF, rel.values)]), cfg.out_dir / "s_inf.mmta")
    if cfg.heatmap:
        save_pgm(heatmap_bytes(rel), cfg.out_dir / "s_inf.pgm")
    print(f"wrote {cfg.out_dir / 's_inf.mmta'} ({rel.values.shape[1]}x{rel.values.shape[0]})")
    return 0


def cmd_transmit(cfg: PipelineConfig) -> int:
    if cfg.image is None:
        raise ValueError("transmit needs --image")
    image = load_ppm(cfg.image)
    rel = relevance_for(cfg, image)
    plan = plan_for(cfg, image, rel)
    frame = encode_frame(image, plan)
    transmit(frame, ChannelConfig(budget=plan.budget))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    frame_path = cfg.out_dir / "frame.mmsf"
    frame_path.write_bytes(frame.to_bytes())
    write_plan_report(cfg.out_dir / "plan.txt", plan)
    print(f"wrote {frame_path} payload {frame.payload_size} budget {plan.budget}")
    return 0


def cmd_receive(cfg: PipelineConfig) -> int:
    if cfg.frame is None:
        raise ValueError("receive needs a frame file")
    frame = EncodedFrame.from_bytes(cfg.frame.read_bytes())
    image = decode_frame(frame)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.out_dir / "recon.ppm"
    save_ppm(image, out)
    print(f"wrote {out} ({image.width}x{image.height})")
    return 0


def _mask_for(cfg: PipelineConfig, archive: Optional[TensorArchive]) -> Optional[BinaryMask]:
    if cfg.mask is not None:
        return BinaryMask.from_gray(load_pgm(cfg.mask))
    if archive is not None and pl.GT_MASK in archive:
        grid = archive[pl.GT_MASK]
        return BinaryMask.from_gray(grid, threshold=128 if grid.max(initial=0) > 1 else 1)
    return None


def _original_map(cfg: PipelineConfig, archive: Optional[TensorArchive], image) -> Optional[RelevanceMap]:
    if cfg.toy and cfg.mask is not None:
        return toy_relevance(load_pgm(cfg.mask), cfg.blur_radius)
    if archive is not None:
        if pl.S_INF in archive:
            return RelevanceMap(archive[pl.S_INF], normalized=True)
        try:
            dims = (image.height, image.width) if image is not None else (None, None)
            return pl.relevance_from_archive(archive, *dims).map
        except ValueError:
            return None
    return None


def _recon_map(cfg: PipelineConfig, image) -> Optional[RelevanceMap]:
    if cfg.recon_archive is None:
        return None
    archive = load_archive(cfg.recon_archive)
    if pl.S_INF in archive:
        return RelevanceMap(archive[pl.S_INF], normalized=True)
    dims = (image.height, image.width) if image is not None else (None, None)
    return pl.relevance_from_archive(archive, *dims).map


def evaluate_row(
    cfg: PipelineConfig,
    image: RasterImage,
    recon: RasterImage,
    plan_levels: Optional[np.ndarray],
) -> dict[str, object]:
    archive = load_archive(cfg.archive) if cfg.archive else None
    row: dict[str, object] = {
        "image": cfg.image_id or (cfg.image.stem if cfg.image else ""),
        "budget": cfg.budget
        if cfg.budget is not None
        else (
            budget_from_fraction(
                cfg.rate,
                PatchGrid.for_image(image.height, image.width, cfg.patch_size).patch_count,
                cfg.rates.max_rate,
            )
            if cfg.rate is not None
            else None
        ),
        "rate": str(cfg.rate) if cfg.rate is not None else None,
    }
    counts = (
        np.bincount(plan_levels, minlength=cfg.rates.levels).tolist()
        if plan_levels is not None
        else [None] * cfg.rates.levels
    )
    for lvl, count in enumerate(counts):
        row[f"count_l{lvl}"] = count

    mask = _mask_for(cfg, archive)
    row["masked_mse"] = masked_mse(image, recon, mask) if mask is not None else None

    orig_map = _original_map(cfg, archive, image)
    rec_map = _recon_map(cfg, image)
    row["relevance_l1"] = (
        relevance_l1(orig_map, rec_map) if orig_map is not None and rec_map is not None else None
    )
    row["embedding_cosine"] = pl.recon_embedding_cosine(archive) if archive is not None else None
    row["psnr"] = psnr(image, recon)
    return row


def _csv_header(cfg: PipelineConfig) -> list[str]:
    return (
        ["image", "budget", "rate"]
        + [f"count_l{i}" for i in range(cfg.rates.levels)]
        + list(METRIC_COLUMNS)
    )


def write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in header])


def cmd_evaluate(cfg: PipelineConfig) -> int:
    if cfg.image is None:
        raise ValueError("evaluate needs --image")
    image = load_ppm(cfg.image)
    levels = None
    if cfg.frame is not None:
        frame = EncodedFrame.from_bytes(cfg.frame.read_bytes())
        recon = decode_frame(frame)
        levels = frame.levels
    elif cfg.recon is not None:
        recon = load_ppm(cfg.recon)
    else:
        raise ValueError("evaluate needs --frame or --recon")
    row = evaluate_row(cfg, image, recon, levels)
    header = _csv_header(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out_dir / "eval.csv", header, [row])
    print(",".join(header))
    print(",".join(_fmt(row.get(col)) for col in header))
    return 0


def _discover_corpus(corpus: Path) -> list[dict[str, Optional[Path]]]:
    entries = []
    for img_path in sorted(corpus.glob("*.ppm")):
        stem = img_path.name[: -len(".ppm")]
        mask = corpus / f"{stem}.mask.pgm"
        archive = corpus / f"{stem}.mmta"
        entries.append(
            {
                "image": img_path,
                "mask": mask if mask.exists() else None,
                "archive": archive if archive.exists() else None,
            }
        )
    if not entries:
        raise ValueError(f"no .ppm images under {corpus}")
    return entries


def _mean(values: list[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return sum(present) / len(present)


def sweep_corpus(cfg: PipelineConfig) -> tuple[list[int], list[dict]]:
    entries = _discover_corpus(cfg.corpus)
    rows = []
    for percent in sorted(set(cfg.sweep_rates)):  # canonical row order
        rate = Fraction(percent, 100)
        per_metric: dict[str, list[Optional[float]]] = {m: [] for m in METRIC_COLUMNS}
        budgets = []
        payloads = []
        for entry in entries:
            image = load_ppm(entry["image"])
            item = PipelineConfig(
                image=entry["image"],
                archive=entry["archive"],
                mask=entry["mask"],
                rate=rate,
                patch_size=cfg.patch_size,
                rates=cfg.rates,
                toy=cfg.toy,
                blur_radius=cfg.blur_radius,
            )
            rel = relevance_for(item, image)
            plan = plan_for(item, image, rel)
            frame = transmit(encode_frame(image, plan), ChannelConfig(budget=plan.budget))
            recon = decode_frame(frame)
            row = evaluate_row(item, image, recon, frame.levels)
            for m in METRIC_COLUMNS:
                per_metric[m].append(row[m])
            budgets.append(plan.budget)
            payloads.append(frame.payload_size)
        agg = {
            "rate_percent": percent,
            "budget_mean": _mean(budgets),
            "payload_mean": _mean(payloads),
        }
        for m in METRIC_COLUMNS:
            agg[m] = _mean(per_metric[m])
        mse = agg["masked_mse"]
        # unit-interval variant of the uint8-domain MSE for cross-scale comparison
        agg["masked_mse_unit"] = mse / (255.0 * 255.0) if mse is not None else None
        rows.append(agg)
    return [r["rate_percent"] for r in rows], rows


def cmd_sweep(cfg: PipelineConfig) -> int:
    if cfg.corpus is None:
        raise ValueError("sweep needs --corpus")
    xs, rows = sweep_corpus(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    header = ["rate_percent", "budget_mean", "payload_mean", "masked_mse", "masked_mse_unit",
              "relevance_l1", "embedding_cosine", "psnr"]
    write_csv(cfg.out_dir / "sweep.csv", header, rows)
    for metric in METRIC_COLUMNS:
        write_line_plot(
            cfg.out_dir / f"sweep_{metric}.svg",
            [float(x) for x in xs],
            {metric: [r[metric] for r in rows]},
            title=f"{metric} vs channel rate",
            xlabel="channel rate (%)",
            ylabel=metric,
        )
    print(f"wrote {cfg.out_dir / 'sweep.csv'} with {len(rows)} rates")
    return 0


def cmd_pipeline(cfg: PipelineConfig) -> int:
    if cfg.image is None:
        raise ValueError("pipeline needs --image")
    image = load_ppm(cfg.image)
    rel = relevance_for(cfg, image)
    plan = plan_for(cfg, image, rel)
    frame = transmit(encode_frame(image, plan), ChannelConfig(budget=plan.budget))
    recon = decode_frame(frame)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    save_archive(TensorArchive([Tensor(pl.S_INF, rel.values)]), cfg.out_dir / "s_inf.mmta")
    if cfg.heatmap:
        save_pgm(heatmap_bytes(rel), cfg.out_dir / "s_inf.pgm")
    (cfg.out_dir / "frame.mmsf").write_bytes(frame.to_bytes())
    write_plan_report(cfg.out_dir / "plan.txt", plan)
    save_ppm(recon, cfg.out_dir / "recon.ppm")
    row = evaluate_row(cfg, image, recon, frame.levels)
    write_csv(cfg.out_dir / "eval.csv", _csv_header(cfg), [row])
    print(f"pipeline done: payload {frame.payload_size} of budget {plan.budget}")
    return 0


# ------------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key-value config file")
    p.add_argument("--out-dir", type=Path, help="output directory (default ./out)")
    p.add_argument("--patch-size", type=int)
    p.add_argument("--rates", type=parse_rate_table, help="rate table, e.g. 0,12,24,48,192")


def _add_scoring(p: argparse.ArgumentParser) -> None:
    p.add_argument("--image", type=Path)
    p.add_argument("--archive", type=Path)
    p.add_argument("--mask", type=Path)
    p.add_argument("--toy", action="store_true", help="score from the mask, no archive needed")
    p.add_argument("--blur-radius", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semtx",
        description="query-guided semantic image transmission under a byte budget",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="write the normalized relevance map")
    _add_common(p)
    _add_scoring(p)
    p.add_argument("--heatmap", action="store_true", help="also write a PGM heatmap")

    p = sub.add_parser("transmit", help="score, allocate, encode, and check the channel")
    _add_common(p)
    _add_scoring(p)
    p.add_argument("--rate", type=parse_rate, help="channel rate fraction in [0,1]")
    p.add_argument("--budget", type=int, help="absolute byte budget")
    p.add_argument("--uniform-level", type=int, help="baseline: force one level for every patch")

    p = sub.add_parser("receive", help="decode a frame back into an image")
    _add_common(p)
    p.add_argument("frame", type=Path)

    p = sub.add_parser("evaluate", help="metrics for one transmitted image")
    _add_common(p)
    _add_scoring(p)
    p.add_argument("--frame", type=Path)
    p.add_argument("--recon", type=Path, help="reconstructed PPM (alternative to --frame)")
    p.add_argument("--recon-archive", type=Path)
    p.add_argument("--rate", type=parse_rate)
    p.add_argument("--budget", type=int)
    p.add_argument("--image-id")

    p = sub.add_parser("sweep", help="metric-vs-rate curves over a corpus directory")
    _add_common(p)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--toy", action="store_true")
    p.add_argument("--blur-radius", type=int)
    p.add_argument("--sweep-rates", type=parse_sweep_rates, help="percent list, e.g. 0,10,50,100")

    p = sub.add_parser("pipeline", help="score + transmit + receive + evaluate")
    _add_common(p)
    _add_scoring(p)
    p.add_argument("--rate", type=parse_rate)
    p.add_argument("--budget", type=int)
    p.add_argument("--uniform-level", type=int, help="baseline: force one level for every patch")
    p.add_argument("--recon-archive", type=Path)
    p.add_argument("--image-id")
    p.add_argument("--heatmap", action="store_true")

    return parser


_COMMANDS = {
    "score": cmd_score,
    "transmit": cmd_transmit,
    "receive": cmd_receive,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "pipeline": cmd_pipeline,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        return _COMMANDS[args.command](cfg)
    except CapacityError as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return 4
    except FormatError as e:
        print(f"format error: {e}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
