"""Word segmentation of line images and its evaluation.

The main method binarizes a line, merges connected components into word
groups by horizontal proximity, and cuts the line at the N-1 widest
inter-group gaps, N being the transcript word count. A vertical-projection
baseline is provided for comparison; it splits at every zero-ink column run
wider than a minimum gap and does not consult the transcript.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imaging
from .config import PipelineConfig
from .errors import EmptyCorpus, NoInk, UnderSegmented
from .imaging import Component
from .manifest import LineRecord, WordSpan


@dataclass
class WordGroup:
    """Components merged into one word candidate; bbox is their envelope."""

    members: list[Component]
    x_min: int
    x_max: int
    y_min: int
    y_max: int


@dataclass
class WordCut:
    """One word cut out of a line: pixels plus the span it came from."""

    label: str
    span: WordSpan
    pixels: np.ndarray
    y_top: int
    y_bottom: int


@dataclass
class LineVerdict:
    line_id: str
    perfect: bool
    detected: int
    expected: int
    error: str = ""


@dataclass
class BoundaryEvalReport:
    method: str
    lines_evaluated: int
    perfect_matches: int
    perfect_match_rate: float
    mean_detected_words_per_line: float
    mean_expected_words_per_line: float
    per_line: list[LineVerdict] = field(default_factory=list)

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["per_line"] = [dataclasses.asdict(v) for v in self.per_line]
        return d


def horizontal_gap(prev: Component | WordGroup, nxt: Component | WordGroup) -> int:
    """Columns strictly between two bboxes; overlap counts as 0."""
    return max(0, nxt.x_min - prev.x_max - 1)


def group_components(components: list[Component], merge_px: int) -> list[WordGroup]:
    """Merge x-sorted components whose chained horizontal gaps are <= merge_px.

    A running envelope suffices: components are sorted by x_min, so the gap
    from the group member with the largest x_max decides membership.
    """
    groups: list[WordGroup] = []
    for c in components:
        if groups and max(0, c.x_min - groups[-1].x_max - 1) <= merge_px:
            g = groups[-1]
            g.members.append(c)
            g.x_min = min(g.x_min, c.x_min)
            g.x_max = max(g.x_max, c.x_max)
            g.y_min = min(g.y_min, c.y_min)
            g.y_max = max(g.y_max, c.y_max)
        else:
            groups.append(WordGroup([c], c.x_min, c.x_max, c.y_min, c.y_max))
    return groups


def select_boundaries(groups: list[WordGroup], n_words: int) -> list[WordSpan]:
    """Fuse groups into exactly n_words spans at the N-1 widest gaps.

    Ties between equal gaps go to the leftmost gap. Raises UnderSegmented
    when there are fewer groups than words.
    """
    if n_words < 1:
        raise ValueError("n_words must be >= 1")
    if len(groups) < n_words:
        raise UnderSegmented(found=len(groups), needed=n_words)
    gaps = [horizontal_gap(groups[i], groups[i + 1]) for i in range(len(groups) - 1)]
    order = sorted(range(len(gaps)), key=lambda i: (-gaps[i], i))
    separators = sorted(order[: n_words - 1])
    spans: list[WordSpan] = []
    start = 0
    for sep in separators + [len(groups) - 1]:
        spans.append(WordSpan(groups[start].x_min, groups[sep].x_max))
        start = sep + 1
    return spans


def _line_mask(line: LineRecord, cfg: PipelineConfig, base_file: str | Path | None):
    if isinstance(line.image, np.ndarray):
        gray = imaging.as_gray(line.image)
    else:
        path = Path(line.image)
        if base_file is not None and not path.is_absolute():
            path = Path(base_file).parent / path
        gray = imaging.load_gray(path, auto_invert=cfg.auto_invert)
    t = imaging.otsu_threshold(gray)
    mask = imaging.binarize(gray, t)
    # A single-class mask means no figure/ground contrast: a blank page
    # thresholds to all-ink (constant image) or all-paper, never to words.
    if mask.all() or not mask.any():
        raise NoInk(f"line {line.line_id} is blank")
    return gray, mask


def cc_segment_spans(
    line: LineRecord, cfg: PipelineConfig, base_file: str | Path | None = None
) -> list[WordSpan]:
    """Connected-component word spans for one line."""
    gray, mask = _line_mask(line, cfg, base_file)
    components = imaging.connected_components(mask)
    groups = group_components(components, cfg.merge_px)
    return select_boundaries(groups, line.word_count)


def segment_line(
    line: LineRecord, cfg: PipelineConfig, base_file: str | Path | None = None
) -> list[WordCut]:
    """Cut exactly one crop per transcript word from a line image.

    Crops take the span's columns and the span's tight ink rows plus a
    margin, clamped to the image. Raises NoInk or UnderSegmented when the
    line cannot be segmented; callers skip and count such lines.
    """
    gray, mask = _line_mask(line, cfg, base_file)
    components = imaging.connected_components(mask)
    groups = group_components(components, cfg.merge_px)
    spans = select_boundaries(groups, line.word_count)
    h = gray.shape[0]
    cuts: list[WordCut] = []
    for token, span in zip(line.tokens, spans):
        rows = np.flatnonzero(mask[:, span.x_left : span.x_right + 1].any(axis=1))
        y0 = max(0, int(rows[0]) - cfg.crop_margin_px)
        y1 = min(h - 1, int(rows[-1]) + cfg.crop_margin_px)
        pixels = gray[y0 : y1 + 1, span.x_left : span.x_right + 1].copy()
        cuts.append(WordCut(label=token, span=span, pixels=pixels, y_top=y0, y_bottom=y1))
    return cuts


def _zero_runs(counts: np.ndarray, lo: int, hi: int) -> list[tuple[int, int]]:
    # maximal runs of zero columns within [lo, hi], inclusive bounds
    runs: list[tuple[int, int]] = []
    x = lo
    while x <= hi:
        if counts[x] == 0:
            start = x
            while x <= hi and counts[x] == 0:
                x += 1
            runs.append((start, x - 1))
        else:
            x += 1
    return runs


def projection_segment(
    line: LineRecord, cfg: PipelineConfig, base_file: str | Path | None = None
) -> list[WordSpan]:
    """Vertical-projection baseline.

    Splits at every maximal zero-ink column run wider than
    projection_min_gap_px; the span count is whatever the profile yields,
    which is the baseline's measured failure mode. When
    projection_use_word_count is set, only the N-1 widest runs are kept
    (leftmost wins ties), matching the transcript-aware variant.
    """
    gray, mask = _line_mask(line, cfg, base_file)
    counts = imaging.column_ink_counts(mask)
    ink_cols = np.flatnonzero(counts)
    lo, hi = int(ink_cols[0]), int(ink_cols[-1])
    min_gap = cfg.projection_min_gap_px
    candidates = [r for r in _zero_runs(counts, lo, hi) if r[1] - r[0] + 1 > min_gap]
    if cfg.projection_use_word_count and len(candidates) > line.word_count - 1:
        widths = [e - s + 1 for s, e in candidates]
        order = sorted(range(len(candidates)), key=lambda i: (-widths[i], i))
        keep = sorted(order[: line.word_count - 1])
        candidates = [candidates[i] for i in keep]
    spans: list[WordSpan] = []
    start = lo
    for s, e in candidates + [(hi + 1, hi + 1)]:
        seg = ink_cols[(ink_cols >= start) & (ink_cols < s)]
        if len(seg):
            spans.append(WordSpan(int(seg[0]), int(seg[-1])))
        start = e + 1
    return spans


def evaluate_boundaries(
    pred: list[WordSpan], gt: list[WordSpan], tol_px: int
) -> tuple[bool, int]:
    """Perfect match iff counts agree and every boundary is within tol_px."""
    if len(pred) != len(gt):
        return False, len(pred)
    for p, g in zip(pred, gt):
        if abs(p.x_left - g.x_left) > tol_px or abs(p.x_right - g.x_right) > tol_px:
            return False, len(pred)
    return True, len(pred)


def eval_corpus(
    lines: list[LineRecord],
    method: str,
    cfg: PipelineConfig,
    base_file: str | Path | None = None,
) -> BoundaryEvalReport:
    """Boundary evaluation over a ground-truthed corpus.

    method is "cc" or "projection". Lines the method fails on
    (UnderSegmented, NoInk) count as non-matches; fairness requires keeping
    them in the denominator.
    """
    if not lines:
        raise EmptyCorpus("no lines to evaluate")
    if method not in ("cc", "projection"):
        raise ValueError(f"unknown method {method!r}")
    verdicts: list[LineVerdict] = []
    for line in lines:
        if line.gt_spans is None:
            raise EmptyCorpus(f"line {line.line_id} has no gt_spans")
        try:
            if method == "cc":
                pred = cc_segment_spans(line, cfg, base_file)
            else:
                pred = projection_segment(line, cfg, base_file)
            perfect, detected = evaluate_boundaries(pred, line.gt_spans, cfg.boundary_tol_px)
            verdicts.append(
                LineVerdict(line.line_id, perfect, detected, len(line.gt_spans))
            )
        except UnderSegmented as e:
            verdicts.append(
                LineVerdict(line.line_id, False, e.found, len(line.gt_spans), "under_segmented")
            )
        except NoInk:
            verdicts.append(LineVerdict(line.line_id, False, 0, len(line.gt_spans), "no_ink"))
    verdicts.sort(key=lambda v: v.line_id)
    n = len(verdicts)
    matches = sum(v.perfect for v in verdicts)
    return BoundaryEvalReport(
        method=method,
        lines_evaluated=n,
        perfect_matches=matches,
        perfect_match_rate=matches / n,
        mean_detected_words_per_line=sum(v.detected for v in verdicts) / n,
        mean_expected_words_per_line=sum(v.expected for v in verdicts) / n,
        per_line=verdicts,
    )
