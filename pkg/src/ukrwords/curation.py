"""Five-stage quality filtering and rare-letter oversampling.

Stages run in a fixed order: label content, trailing comma, crop size, OCR
similarity gate, minimum per-writer count. Crops rejected for being pure
punctuation are kept in a side pool as punctuation-bank candidates.
"""

from __future__ import annotations

import dataclasses
import unicodedata
from dataclasses import dataclass, field

from .config import DEFAULT_RARE_FACTOR, PipelineConfig, config_hash
from .errors import EmptyLabel, OcrError
from .manifest import Manifest, WordCrop
from .ocr_gate import OcrResult, similarity, transcribe_all

TRAILING_PUNCT = ",.;:!?"

STAGE_NAMES = {
    1: "label_content",
    2: "trailing_comma",
    3: "crop_size",
    4: "ocr_gate",
    5: "writer_min_count",
}


def normalize_label(raw: str) -> tuple[str, str]:
    """Trim whitespace and strip trailing punctuation, keeping apostrophes.

    Returns (label, stripped_suffix). The suffix is recorded so the
    trailing-comma stage can act on the original spelling. Raises
    EmptyLabel when nothing remains, which routes the crop to the
    punctuation-bank candidate pool.
    """
    token = raw.strip()
    stripped = ""
    while token and token[-1] in TRAILING_PUNCT:
        stripped = token[-1] + stripped
        token = token[:-1]
    if not token:
        raise EmptyLabel(raw)
    return token, stripped


def _is_latin(ch: str) -> bool:
    return unicodedata.name(ch, "").startswith("LATIN")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def stage1_label_filter(crop: WordCrop) -> str | None:
    """Reject reason, or None to keep.

    Latin letters reject wherever they appear in the raw label; pure
    punctuation and pure digits are judged on the normalized label so a
    stripped trailing mark cannot shield an otherwise invalid token.
    """
    if any(_is_latin(ch) for ch in crop.raw_label):
        return "latin"
    if all(_is_punct(ch) for ch in crop.label):
        return "punctuation"
    if all(ch.isdigit() for ch in crop.label):
        return "digits"
    return None


def stage2_trailing_comma_filter(crop: WordCrop) -> str | None:
    """The image shows a comma the normalized label lost; reject."""
    if crop.raw_label.strip().endswith(","):
        return "trailing_comma"
    return None


def stage3_size_filter(crop: WordCrop, cfg: PipelineConfig) -> str | None:
    # strict: exactly min_width_px wide or max_height_px tall passes
    if crop.width < cfg.min_width_px:
        return "too_narrow"
    if crop.height > cfg.max_height_px:
        return "too_tall"
    return None


def gate_decision(length: int, s: float, cfg: PipelineConfig) -> bool:
    """Length-stratified similarity gate.

    Short labels pass unconditionally, mid-length ones at the relaxed
    threshold, longer ones at the standard threshold.
    """
    if length <= cfg.short_len_max:
        return True
    if length <= cfg.mid_len_max:
        return s >= cfg.ocr_threshold_mid
    return s >= cfg.ocr_threshold_long


def stage4_ocr_gate(crop: WordCrop, ocr: OcrResult, cfg: PipelineConfig) -> str | None:
    s = similarity(crop.label, ocr.text)
    if gate_decision(len(crop.label), s, cfg):
        return None
    return "ocr_mismatch"


def stage5_writer_filter(manifest: Manifest, cfg: PipelineConfig) -> tuple[Manifest, int]:
    """Drop all crops of writers below the minimum sample count.

    One pass suffices: removing a writer never lowers another's count.
    Returns the filtered manifest and the number of crops removed.
    """
    counts = manifest.writer_counts()
    keep = [c for c in manifest.crops if counts[c.writer_id] >= cfg.min_writer_samples]
    out = Manifest(
        crops=keep,
        source_id=manifest.source_id,
        stage=manifest.stage,
        config_hash=manifest.config_hash,
    )
    return out, len(manifest.crops) - len(keep)


@dataclass
class StageCount:
    stage: int
    name: str
    input: int
    kept: int
    rejected: int
    reasons: dict[str, int] = field(default_factory=dict)


@dataclass
class FilterReport:
    stages: list[StageCount]
    final_samples: int
    final_writers: int
    punct_pool: int
    held_back: int
    config_hash: str

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        return d


@dataclass
class PipelineResult:
    manifest: Manifest
    report: FilterReport
    punct_pool: list[WordCrop]


def run_pipeline(
    manifest: Manifest,
    backend,
    cfg: PipelineConfig,
    jobs: int = 1,
    base_file=None,
) -> PipelineResult:
    """Apply stages 1-5 in order and account for every crop.

    Crops whose OCR transcription is unavailable are held back (rejected at
    stage 4 with their own reason), never silently kept. The counts
    telescope: each stage's kept count is the next stage's input count.
    """
    chash = config_hash(cfg)
    stages: list[StageCount] = []
    punct_pool: list[WordCrop] = []
    held_back = 0

    # stage 1, including label normalization
    current: list[WordCrop] = []
    sc = StageCount(1, STAGE_NAMES[1], len(manifest.crops), 0, 0)
    for crop in manifest.crops:
        try:
            label, stripped = normalize_label(crop.raw_label)
        except EmptyLabel:
            sc.rejected += 1
            sc.reasons["punctuation"] = sc.reasons.get("punctuation", 0) + 1
            punct_pool.append(crop)
            continue
        crop = dataclasses.replace(crop, label=label, stripped=stripped)
        reason = stage1_label_filter(crop)
        if reason is None:
            current.append(crop)
        else:
            sc.rejected += 1
            sc.reasons[reason] = sc.reasons.get(reason, 0) + 1
            if reason == "punctuation":
                punct_pool.append(crop)
    sc.kept = len(current)
    stages.append(sc)

    # stages 2 and 3 are pure per-crop predicates
    checks = [(2, stage2_trailing_comma_filter), (3, lambda c: stage3_size_filter(c, cfg))]
    for stage_no, check in checks:
        sc = StageCount(stage_no, STAGE_NAMES[stage_no], len(current), 0, 0)
        nxt = []
        for crop in current:
            reason = check(crop)
            if reason is None:
                nxt.append(crop)
            else:
                sc.rejected += 1
                sc.reasons[reason] = sc.reasons.get(reason, 0) + 1
        sc.kept = len(nxt)
        stages.append(sc)
        current = nxt

    # stage 4: transcription gate, bounded concurrency, manifest order
    sc = StageCount(4, STAGE_NAMES[4], len(current), 0, 0)
    results = transcribe_all(backend, current, jobs=jobs, base_file=base_file)
    nxt = []
    for crop, res in zip(current, results):
        if isinstance(res, OcrError):
            sc.rejected += 1
            sc.reasons["ocr_unavailable"] = sc.reasons.get("ocr_unavailable", 0) + 1
            held_back += 1
            continue
        reason = stage4_ocr_gate(crop, res, cfg)
        if reason is None:
            nxt.append(crop)
        else:
            sc.rejected += 1
            sc.reasons[reason] = sc.reasons.get(reason, 0) + 1
    sc.kept = len(nxt)
    stages.append(sc)
    current = nxt

    # stage 5
    sc = StageCount(5, STAGE_NAMES[5], len(current), 0, 0)
    mid = Manifest(crops=current, source_id=manifest.source_id, stage="filtered", config_hash=chash)
    out, dropped = stage5_writer_filter(mid, cfg)
    sc.rejected = dropped
    if dropped:
        sc.reasons["writer_below_min"] = dropped
    sc.kept = len(out.crops)
    stages.append(sc)

    report = FilterReport(
        stages=stages,
        final_samples=len(out.crops),
        final_writers=len(out.writer_counts()),
        punct_pool=len(punct_pool),
        held_back=held_back,
        config_hash=chash,
    )
    return PipelineResult(manifest=out, report=report, punct_pool=punct_pool)


def oversample_multiplicity(label: str, cfg: PipelineConfig) -> int:
    """Total multiplicity for a label: max factor over contained rare letters."""
    factors = [
        cfg.rare_letter_factors.get(ch, DEFAULT_RARE_FACTOR)
        for ch in set(label)
        if ch in cfg.rare_letters
    ]
    return max(factors, default=1)


def oversample(manifest: Manifest, cfg: PipelineConfig) -> Manifest:
    """Duplicate crops containing rare letters; duplicates follow originals.

    Duplicates reference the same image file and carry repeat_index 1..f-1
    with derived crop ids so manifest ids stay unique. With an empty rare
    letter set this is the identity.
    """
    out: list[WordCrop] = []
    for crop in manifest.crops:
        out.append(crop)
        f = oversample_multiplicity(crop.label, cfg)
        for k in range(1, f):
            out.append(
                dataclasses.replace(crop, crop_id=f"{crop.crop_id}.r{k}", repeat_index=k)
            )
    return Manifest(
        crops=out,
        source_id=manifest.source_id,
        stage="balanced",
        config_hash=config_hash(cfg),
    )
