"""Sentence-strip composition from word crops.

Words are brightness-normalized, baseline-aligned by detected text-body
bottom, and concatenated with configurable gaps. Punctuation comes from a
bank of real handwritten marks; when the bank cannot supply a glyph the
mark is skipped with a warning rather than synthesized.
"""

from __future__ import annotations

import json
import logging
import math
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .errors import EmptyBank, EmptyPlan, NoInk, ToolkitError
from .fsio import atomic_write_text
from .imaging import as_gray, binarize, load_gray, otsu_threshold, row_ink_extent, save_gray

log = logging.getLogger(__name__)

BANK_GLYPHS = (",", ".", "-")

BACKGROUND = 255


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class BodyProfile:
    body_top: int
    body_bottom: int
    has_descender: bool
    fallback: bool = False

    @property
    def body_height(self) -> int:
        return self.body_bottom - self.body_top + 1


def detect_body(crop: np.ndarray, span_frac: float) -> BodyProfile:
    """Split a word crop into text body vs ascender/descender rows.

    A row belongs to the body iff its ink extent (rightmost minus leftmost
    ink column, inclusive) covers at least span_frac of the crop width.
    When no row qualifies (e.g. a lone thin stroke) the full ink range is
    used and the profile is flagged as a fallback.
    """
    img = as_gray(crop)
    mask = binarize(img, otsu_threshold(img))
    # a constant crop binarizes to a single class: no figure/ground contrast
    if mask.all() or not mask.any():
        raise NoInk("crop contains no ink")
    width = img.shape[1]
    # the threshold itself may not be exactly representable in binary
    # floating point, so give the comparison a hair of slack
    need = span_frac * width - 1e-9
    extents = row_ink_extent(mask)
    body_rows = [
        y for y, ext in enumerate(extents) if ext is not None and ext[1] - ext[0] + 1 >= need
    ]
    ink_rows = [y for y, ext in enumerate(extents) if ext is not None]
    if not body_rows:
        return BodyProfile(ink_rows[0], ink_rows[-1], has_descender=False, fallback=True)
    top, bottom = body_rows[0], body_rows[-1]
    descender = any(y > bottom for y in ink_rows)
    return BodyProfile(top, bottom, has_descender=descender)


def _pad_rows(img: np.ndarray, above: int, below: int) -> np.ndarray:
    return np.pad(img, ((above, below), (0, 0)), constant_values=BACKGROUND)


def align_baselines(
    crops: list[np.ndarray], cfg: PipelineConfig
) -> tuple[list[np.ndarray], int, list[BodyProfile]]:
    """Pad crops so every body bottom lands on one shared row.

    Only background rows are added, never removed, so no crop is clipped.
    Returns the equal-height crops, the shared body-bottom row, and the
    per-crop profiles measured before padding.
    """
    if not crops:
        raise ToolkitError("nothing to align")
    imgs = [as_gray(c) for c in crops]
    profiles = [detect_body(c, cfg.body_span_frac) for c in imgs]
    target_row = max(p.body_bottom for p in profiles)
    shifted = [
        _pad_rows(img, target_row - p.body_bottom, 0) for img, p in zip(imgs, profiles)
    ]
    height = max(s.shape[0] for s in shifted)
    aligned = [_pad_rows(s, 0, height - s.shape[0]) for s in shifted]
    return aligned, target_row, profiles


def normalize_brightness(crop: np.ndarray, pct: float) -> np.ndarray:
    """Whiten the background: the (100-pct)th percentile maps to 255.

    The map is linear, fixes the darkest pixel at its own value, and clamps
    above. Applying it twice changes nothing, and pixel ordering by
    intensity is preserved. A constant image comes back unchanged.
    """
    if not 0 < pct < 50:
        raise ToolkitError(f"percentile {pct} outside (0, 50)")
    img = as_gray(crop)
    flat = np.sort(img, axis=None)
    k = int(math.floor((100.0 - pct) / 100.0 * (flat.size - 1)))
    q = int(flat[k])
    lo = int(flat[0])
    if q <= lo:
        return img.copy()
    out = lo + (img.astype(np.float64) - lo) * ((255.0 - lo) / (q - lo))
    out = np.floor(out + 0.5)  # round half up, like the luma conversion
    np.clip(out, 0.0, 255.0, out=out)
    return out.astype(np.uint8)


@dataclass
class PunctMark:
    glyph: str
    image: np.ndarray
    body: BodyProfile
    source: str = ""


@dataclass
class PunctuationBank:
    marks: dict[str, list[PunctMark]] = field(default_factory=dict)
    seed: int = 0

    def __len__(self) -> int:
        return sum(len(v) for v in self.marks.values())

    def pick(self, glyph: str, rng: random.Random) -> PunctMark | None:
        pool = self.marks.get(glyph)
        if not pool:
            return None
        return pool[rng.randrange(len(pool))]


def build_punct_bank(
    candidates: list[tuple[str, np.ndarray, str]],
    size: int,
    seed: int,
    span_frac: float = 0.35,
) -> PunctuationBank:
    """Sample up to `size` marks from (glyph, image, source_id) candidates.

    Quotas are proportional to per-glyph availability (largest remainder),
    the draw itself is seeded, and candidates outside the supported glyph
    set or without ink are discarded up front.
    """
    groups: dict[str, list[PunctMark]] = {g: [] for g in BANK_GLYPHS}
    for glyph, image, source in candidates:
        glyph = glyph.strip()
        if glyph not in groups:
            continue
        img = as_gray(image)
        try:
            body = detect_body(img, span_frac)
        except NoInk:
            continue
        groups[glyph].append(PunctMark(glyph, img, body, source))
    total = sum(len(v) for v in groups.values())
    if total == 0:
        raise EmptyBank("no usable punctuation candidates")
    if total <= size:
        return PunctuationBank(marks={g: v for g, v in groups.items() if v}, seed=seed)

    # largest-remainder apportionment of `size` across glyphs
    exact = {g: size * len(v) / total for g, v in groups.items() if v}
    quota = {g: int(x) for g, x in exact.items()}
    leftover = size - sum(quota.values())
    for g in sorted(exact, key=lambda g: (exact[g] - quota[g], g), reverse=True):
        if leftover <= 0:
            break
        if quota[g] < len(groups[g]):
            quota[g] += 1
            leftover -= 1
    rng = random.Random(seed)
    marks = {}
    for g in BANK_GLYPHS:
        if groups[g] and quota.get(g, 0) > 0:
            idx = sorted(rng.sample(range(len(groups[g])), min(quota[g], len(groups[g]))))
            marks[g] = [groups[g][i] for i in idx]
    return PunctuationBank(marks=marks, seed=seed)


def save_bank(bank: PunctuationBank, out_dir: str | Path) -> None:
    """Write the bank as PNGs plus an index of glyphs and body metrics."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = {",": "comma", ".": "period", "-": "hyphen"}
    index = {"seed": bank.seed, "marks": []}
    for glyph in BANK_GLYPHS:
        for i, mark in enumerate(bank.marks.get(glyph, [])):
            fname = f"{names[glyph]}_{i:04d}.png"
            save_gray(out / fname, mark.image)
            index["marks"].append(
                {
                    "glyph": glyph,
                    "file": fname,
                    "body_top": mark.body.body_top,
                    "body_bottom": mark.body.body_bottom,
                    "has_descender": mark.body.has_descender,
                    "fallback": mark.body.fallback,
                    "source": mark.source,
                }
            )
    atomic_write_text(
        out / "index.json",
        json.dumps(index, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
    )


def load_bank(bank_dir: str | Path) -> PunctuationBank:
    bank_dir = Path(bank_dir)
    with open(bank_dir / "index.json", "r", encoding="utf-8") as f:
        index = json.load(f)
    marks: dict[str, list[PunctMark]] = {}
    for entry in index["marks"]:
        img = load_gray(bank_dir / entry["file"], auto_invert=False)
        body = BodyProfile(
            entry["body_top"],
            entry["body_bottom"],
            entry["has_descender"],
            entry.get("fallback", False),
        )
        marks.setdefault(entry["glyph"], []).append(
            PunctMark(entry["glyph"], img, body, entry.get("source", ""))
        )
    bank = PunctuationBank(marks=marks, seed=index.get("seed", 0))
    if len(bank) == 0:
        raise EmptyBank(f"{bank_dir}: empty bank index")
    return bank


@dataclass(frozen=True)
class PlanToken:
    kind: str  # "word" | "punct"
    value: str  # crop_id or glyph


@dataclass
class SentencePlan:
    tokens: list[PlanToken]

    def __post_init__(self):
        if not self.tokens:
            raise EmptyPlan("sentence plan has no tokens")
        if self.tokens[0].kind != "word":
            raise EmptyPlan("sentence plan must begin with a word")
        for prev, cur in zip(self.tokens, self.tokens[1:]):
            if prev.kind == "punct" and cur.kind == "punct":
                raise EmptyPlan("two consecutive punctuation tokens")

    @property
    def word_ids(self) -> list[str]:
        return [t.value for t in self.tokens if t.kind == "word"]


def parse_plan(raw: object) -> SentencePlan:
    """Parse the on-disk token list: [{"word": id} | {"punct": glyph}]."""
    if not isinstance(raw, list):
        raise EmptyPlan("plan must be a list of tokens")
    tokens = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or len(item) != 1:
            raise EmptyPlan(f"token {i}: expected one-key object, got {item!r}")
        (kind, value), = item.items()
        if kind == "word":
            tokens.append(PlanToken("word", str(value)))
        elif kind == "punct":
            if value not in BANK_GLYPHS:
                raise EmptyPlan(f"token {i}: unsupported glyph {value!r}")
            tokens.append(PlanToken("punct", value))
        else:
            raise EmptyPlan(f"token {i}: unknown token kind {kind!r}")
    return SentencePlan(tokens)


def _scale_mark(img: np.ndarray, target_h: int) -> np.ndarray:
    from PIL import Image

    target_h = max(1, target_h)
    h, w = img.shape
    target_w = max(1, _round_half_up(w * target_h / h))
    pil = Image.fromarray(img, mode="L").resize((target_w, target_h), Image.BILINEAR)
    return np.asarray(pil, dtype=np.uint8)


def compose_strip(
    plan: SentencePlan,
    words: dict[str, np.ndarray],
    bank: PunctuationBank | None,
    cfg: PipelineConfig,
    seed: int = 0,
) -> np.ndarray:
    """Render one sentence strip.

    Word tokens are normalized and baseline-aligned; every token after the
    first is preceded by the inter-word gap, except that a word directly
    after a punctuation mark gets half of it. Commas and periods sit with
    their base on the shared baseline; hyphens are centered mid-body. The
    strip width is exactly the sum of token widths and gaps.
    """
    missing = [t.value for t in plan.tokens if t.kind == "word" and t.value not in words]
    if missing:
        raise ToolkitError(f"plan references unknown crops: {missing}")
    normalized = [
        normalize_brightness(words[cid], cfg.brightness_pct) for cid in plan.word_ids
    ]
    aligned, target_row, profiles = align_baselines(normalized, cfg)
    height = aligned[0].shape[0]
    median_body = statistics.median(p.body_height for p in profiles)
    word_gap = _round_half_up(cfg.word_gap_frac * median_body)
    half_gap = _round_half_up(word_gap * cfg.punct_gap_frac)

    rng = random.Random(seed)
    columns: list[np.ndarray] = []  # slabs concatenated left to right
    word_iter = iter(aligned)
    prev_kind: str | None = None
    for token in plan.tokens:
        if token.kind == "word":
            img = next(word_iter)
            if prev_kind is not None:
                gap = half_gap if prev_kind == "punct" else word_gap
                columns.append(np.full((height, gap), BACKGROUND, dtype=np.uint8))
            columns.append(img)
            prev_kind = "word"
            continue
        mark = bank.pick(token.value, rng) if bank is not None else None
        if mark is None:
            log.warning("punctuation bank cannot supply %r; skipping mark", token.value)
            continue
        scaled = _scale_mark(mark.image, _round_half_up(cfg.punct_scale * median_body))
        slab = np.full((height, scaled.shape[1]), BACKGROUND, dtype=np.uint8)
        if token.value == "-":
            mid = target_row - int(median_body) // 2
            top = mid - scaled.shape[0] // 2
        else:
            top = target_row - scaled.shape[0] + 1
        top = min(max(top, 0), height - scaled.shape[0])
        slab[top : top + scaled.shape[0], :] = scaled
        columns.append(np.full((height, word_gap), BACKGROUND, dtype=np.uint8))
        columns.append(slab)
        prev_kind = "punct"
    return np.concatenate(columns, axis=1)


def fit_to_canvas(strip: np.ndarray, cfg: PipelineConfig) -> np.ndarray:
    """Letterbox a strip onto the fixed canvas, preserving aspect ratio."""
    from PIL import Image

    img = as_gray(strip)
    h, w = img.shape
    ch, cw = cfg.canvas_height, cfg.canvas_width
    scale = min(ch / h, cw / w)
    nh = max(1, min(ch, _round_half_up(h * scale)))
    nw = max(1, min(cw, _round_half_up(w * scale)))
    resized = Image.fromarray(img, mode="L").resize((nw, nh), Image.BILINEAR)
    canvas = np.full((ch, cw), BACKGROUND, dtype=np.uint8)
    top = (ch - nh) // 2
    left = (cw - nw) // 2
    canvas[top : top + nh, left : left + nw] = np.asarray(resized, dtype=np.uint8)
    return canvas
