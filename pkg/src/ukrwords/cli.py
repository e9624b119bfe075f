"""Command line entry point.

One binary, eight subcommands covering the dataset pipeline (segment,
filter, balance, bank, assemble) and the evaluations (eval-seg, eval-cer,
eval-fid). Every report embeds the tool version, the pipeline config hash,
and the seed, so any output can be traced to the exact run that made it.
Per-item failures are counted and logged but never abort a batch; a nonzero
exit means the command could not produce its report at all.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .assembly import build_punct_bank, compose_strip, fit_to_canvas, load_bank, parse_plan, save_bank
from .config import RunConfig, config_hash, load_run_config
from .curation import oversample, run_pipeline
from .errors import EmptyBank, EmptyCorpus, ToolkitError
from .fsio import atomic_write_text
from .imaging import load_gray, save_gray
from .manifest import Manifest, WordCrop, load_corpus, load_manifest, resolve_path, save_manifest
from .metrics import cer, frechet_distance, load_cer_samples, load_embeddings
from .ocr_gate import make_backend
from .segmentation import eval_corpus, segment_line

log = logging.getLogger("ukrwords")


def _report_envelope(kind: str, run: RunConfig, body: dict) -> dict:
    head = {
        "report": kind,
        "tool": "ukrwords",
        "version": __version__,
        "config_hash": config_hash(run.pipeline),
        "seed": run.seed,
    }
    head.update(body)
    return head


def _write_report(path: str | Path | None, report: dict) -> None:
    text = json.dumps(report, ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(path, text)


def _build_run(args: argparse.Namespace) -> RunConfig:
    run = load_run_config(args.config)
    endpoint = os.environ.get("UKRWORDS_OCR_ENDPOINT")
    if endpoint:
        run.ocr_endpoint = endpoint
    jobs = os.environ.get("UKRWORDS_JOBS")
    if jobs:
        run.jobs = int(jobs)
    if args.seed is not None:
        run.seed = args.seed
    if args.jobs is not None:
        run.jobs = args.jobs
    if getattr(args, "ocr_backend", None):
        run.ocr_backend = args.ocr_backend
    if getattr(args, "ocr_endpoint", None):
        run.ocr_endpoint = args.ocr_endpoint
    if getattr(args, "ocr_table", None):
        run.ocr_table = args.ocr_table
    if args.log_level:
        run.log_level = args.log_level
    logging.basicConfig(
        level=getattr(logging, run.log_level.upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )
    return run


def cmd_segment(args: argparse.Namespace) -> int:
    run = _build_run(args)
    cfg = run.pipeline
    lines = load_corpus(args.corpus)
    if not lines:
        raise EmptyCorpus(f"{args.corpus}: no lines")
    out_dir = Path(args.out_dir)
    crop_dir = out_dir / "crops"
    crop_dir.mkdir(parents=True, exist_ok=True)

    crops: list[WordCrop] = []
    failures: list[dict] = []
    for line in lines:
        try:
            cuts = segment_line(line, cfg, base_file=args.corpus)
        except ToolkitError as e:
            log.warning("line %s skipped: %s", line.line_id, e)
            failures.append({"line_id": line.line_id, "error": str(e)})
            continue
        for i, cut in enumerate(cuts):
            crop_id = f"{line.line_id}.w{i:02d}"
            fname = f"{crop_id}.png"
            save_gray(crop_dir / fname, cut.pixels)
            crops.append(
                WordCrop(
                    crop_id=crop_id,
                    writer_id=line.writer_id,
                    label=cut.label,
                    raw_label=cut.label,
                    image=f"crops/{fname}",
                    width=cut.pixels.shape[1],
                    height=cut.pixels.shape[0],
                    line_id=line.line_id,
                    word_index=i,
                )
            )
    manifest = Manifest(
        crops=crops, source_id=Path(args.corpus).name, stage="segmented",
        config_hash=config_hash(cfg),
    )
    save_manifest(manifest, out_dir / "words.jsonl")
    report = _report_envelope(
        "segment",
        run,
        {
            "lines": len(lines),
            "lines_segmented": len(lines) - len(failures),
            "lines_failed": len(failures),
            "crops": len(crops),
            "failures": failures,
            "manifest": "words.jsonl",
        },
    )
    _write_report(out_dir / "segment_report.json", report)
    log.info("segment: %d lines -> %d crops (%d failed)", len(lines), len(crops), len(failures))
    return 0


def cmd_eval_seg(args: argparse.Namespace) -> int:
    run = _build_run(args)
    lines = load_corpus(args.corpus)
    result = eval_corpus(lines, args.method, run.pipeline, base_file=args.corpus)
    report = _report_envelope("eval-seg", run, result.to_json())
    _write_report(args.out, report)
    return 0


def _rehome(crops: list[WordCrop], src_manifest: str, out_dir: Path) -> list[WordCrop]:
    """Rewrite image paths so they stay valid relative to the new manifest."""
    import dataclasses

    out = []
    for crop in crops:
        if Path(crop.image).is_absolute():
            out.append(crop)
            continue
        rel = os.path.relpath(resolve_path(src_manifest, crop.image), out_dir)
        out.append(dataclasses.replace(crop, image=Path(rel).as_posix()))
    return out


def cmd_filter(args: argparse.Namespace) -> int:
    run = _build_run(args)
    manifest = load_manifest(args.manifest)
    backend = make_backend(run)
    result = run_pipeline(
        manifest, backend, run.pipeline, jobs=run.jobs, base_file=args.manifest
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    filtered = result.manifest
    filtered.crops = _rehome(filtered.crops, args.manifest, out_dir)
    pool = Manifest(
        crops=_rehome(result.punct_pool, args.manifest, out_dir),
        source_id=manifest.source_id,
        stage="punct_pool",
        config_hash=config_hash(run.pipeline),
    )
    save_manifest(filtered, out_dir / "filtered.jsonl")
    save_manifest(pool, out_dir / "punct_pool.jsonl")
    report = _report_envelope("filter", run, result.report.to_json())
    _write_report(out_dir / "filter_report.json", report)
    return 0


def cmd_balance(args: argparse.Namespace) -> int:
    run = _build_run(args)
    manifest = load_manifest(args.manifest)
    balanced = oversample(manifest, run.pipeline)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    balanced.crops = _rehome(balanced.crops, args.manifest, out_dir)
    save_manifest(balanced, out_dir / "balanced.jsonl")
    report = _report_envelope(
        "balance",
        run,
        {
            "input_samples": len(manifest),
            "output_samples": len(balanced),
            "duplicates_added": len(balanced) - len(manifest),
        },
    )
    _write_report(out_dir / "balance_report.json", report)
    return 0


def cmd_bank(args: argparse.Namespace) -> int:
    run = _build_run(args)
    pool = load_manifest(args.pool)
    candidates = []
    for crop in sorted(pool.crops, key=lambda c: c.crop_id):
        img = load_gray(resolve_path(args.pool, crop.image), auto_invert=run.pipeline.auto_invert)
        candidates.append((crop.raw_label.strip(), img, crop.crop_id))
    bank = build_punct_bank(
        candidates, run.pipeline.punct_bank_size, run.seed, run.pipeline.body_span_frac
    )
    save_bank(bank, args.out_dir)
    log.info("bank: %d marks from %d candidates", len(bank), len(candidates))
    return 0


def cmd_assemble(args: argparse.Namespace) -> int:
    run = _build_run(args)
    cfg = run.pipeline
    manifest = load_manifest(args.manifest)
    by_id = {c.crop_id: c for c in manifest.crops}
    bank = None
    if args.bank:
        bank = load_bank(args.bank)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    strips = []
    failures = []
    for plan_path in args.plans:
        try:
            with open(plan_path, "r", encoding="utf-8") as f:
                plan = parse_plan(json.load(f))
            words = {}
            for cid in plan.word_ids:
                if cid not in by_id:
                    raise ToolkitError(f"{plan_path}: unknown crop id {cid!r}")
                words[cid] = load_gray(
                    resolve_path(args.manifest, by_id[cid].image),
                    auto_invert=cfg.auto_invert,
                )
            strip = compose_strip(plan, words, bank, cfg, seed=run.seed)
            if args.canvas:
                strip = fit_to_canvas(strip, cfg)
            out_name = Path(plan_path).stem + ".png"
            save_gray(out_dir / out_name, strip)
            strips.append({"plan": Path(plan_path).name, "strip": out_name,
                           "width": strip.shape[1], "height": strip.shape[0]})
        except (ToolkitError, OSError, json.JSONDecodeError) as e:
            log.warning("plan %s failed: %s", plan_path, e)
            failures.append({"plan": Path(plan_path).name, "error": str(e)})
    report = _report_envelope(
        "assemble",
        run,
        {
            "plans": len(args.plans),
            "strips": strips,
            "failures": failures,
            "canvas": bool(args.canvas),
        },
    )
    _write_report(out_dir / "assemble_report.json", report)
    return 0


def cmd_eval_cer(args: argparse.Namespace) -> int:
    run = _build_run(args)
    samples = load_cer_samples(args.pairs)
    report_body = cer(samples).to_json()
    report_body["external"] = {}  # room for metrics computed by other tools
    report = _report_envelope("eval-cer", run, report_body)
    _write_report(args.out, report)
    return 0


def cmd_eval_fid(args: argparse.Namespace) -> int:
    run = _build_run(args)
    unbiased = run.pipeline.unbiased_covariance
    p = load_embeddings(args.reference, unbiased=unbiased)
    q = load_embeddings(args.candidate, unbiased=unbiased)
    fd = frechet_distance(p, q)
    report = _report_envelope(
        "eval-fid",
        run,
        {
            "frechet_distance": fd,
            "reference": {"n": p.n, "dim": p.dim},
            "candidate": {"n": q.n, "dim": q.dim},
            "unbiased_covariance": unbiased,
            "external": {},
        },
    )
    _write_report(args.out, report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config file (JSON or TOML)")
    common.add_argument("--seed", type=int, help="random seed echoed into reports")
    common.add_argument("--jobs", type=int, help="parallelism cap")
    common.add_argument("--log-level", dest="log_level", help="logging verbosity")

    parser = argparse.ArgumentParser(
        prog="ukrwords",
        description="Build and evaluate a handwritten-word dataset from scanned lines.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", parents=[common],
                       help="cut word crops out of line images")
    p.add_argument("corpus", help="line corpus JSONL with transcripts")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval-seg", parents=[common],
                       help="score word boundaries against ground truth")
    p.add_argument("corpus", help="line corpus JSONL with gt_spans")
    p.add_argument("--method", choices=["cc", "projection"], default="cc")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_eval_seg)

    p = sub.add_parser("filter", parents=[common],
                       help="run the five-stage quality filter")
    p.add_argument("manifest", help="word manifest JSONL")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ocr-backend", choices=["file", "http", "echo"])
    p.add_argument("--ocr-endpoint", help="recognizer base URL (http backend)")
    p.add_argument("--ocr-table", help="transcription table JSONL (file backend)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("balance", parents=[common],
                       help="oversample words containing rare letters")
    p.add_argument("manifest")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("bank", parents=[common],
                       help="build the punctuation mark bank")
    p.add_argument("pool", help="punctuation candidate manifest (from filter)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_bank)

    p = sub.add_parser("assemble", parents=[common],
                       help="compose sentence strips from word crops")
    p.add_argument("plans", nargs="+", help="sentence plan JSON files")
    p.add_argument("--manifest", required=True, help="word manifest JSONL")
    p.add_argument("--bank", help="punctuation bank directory")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--canvas", action="store_true",
                   help="letterbox strips onto the fixed canvas")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("eval-cer", parents=[common],
                       help="character error rate report from ref/hyp pairs")
    p.add_argument("pairs", help="JSONL pairs with reference and hypothesis")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_eval_cer)

    p = sub.add_parser("eval-fid", parents=[common],
                       help="Frechet distance between two embedding sets")
    p.add_argument("reference", help="embedding matrix file ('d n' header)")
    p.add_argument("candidate", help="embedding matrix file ('d n' header)")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_eval_fid)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ToolkitError as e:
        log.error("%s", e)
        return 1
    except OSError as e:
        log.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
