"""Grayscale image primitives.

Images are plain numpy arrays: a gray image is a 2-D uint8 array where 0 is
darkest ink and 255 is white background; a binary image is a 2-D bool mask
where True marks ink. All functions are pure.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ToolkitError
from .fsio import atomic_write_bytes


@dataclass(frozen=True)
class Component:
    """One 8-connected ink region, inclusive bbox coordinates."""

    x_min: int
    x_max: int
    y_min: int
    y_max: int
    pixel_count: int

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1


def as_gray(img: np.ndarray) -> np.ndarray:
    a = np.asarray(img)
    if a.ndim != 2 or a.size == 0:
        raise ToolkitError(f"expected non-empty 2-D gray image, got shape {a.shape}")
    return a.astype(np.uint8, copy=False)


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Standard luma weighting, rounded half up."""
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.floor(y + 0.5).astype(np.uint8)


def load_gray(path: str | Path, auto_invert: bool = True) -> np.ndarray:
    """Load a PNG as 8-bit grayscale.

    Color inputs are converted with the 0.299/0.587/0.114 luma weights.
    Scans are expected dark-on-light; when the mean intensity is below 128
    the image is assumed to be an inverted export and is flipped, unless
    auto_invert is off.
    """
    with Image.open(path) as im:
        if im.mode in ("RGB", "RGBA", "P"):
            arr = np.asarray(im.convert("RGB"))
            gray = rgb_to_gray(arr)
        elif im.mode == "L":
            gray = np.asarray(im, dtype=np.uint8)
        else:
            gray = np.asarray(im.convert("L"), dtype=np.uint8)
    if auto_invert and gray.mean() < 128:
        gray = 255 - gray
    return gray


def save_gray(path: str | Path, img: np.ndarray) -> None:
    buf = io.BytesIO()
    Image.fromarray(as_gray(img), mode="L").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def otsu_threshold(img: np.ndarray) -> int:
    """Threshold maximizing between-class variance of the {<=t} / {>t} split.

    The comparison is done in exact integer arithmetic (the variance of a
    split is a ratio of integers for integer intensities), so the
    smallest-maximizer tie-break is bit-stable. A constant image returns its
    single intensity value.
    """
    a = as_gray(img)
    hist = np.bincount(a.ravel(), minlength=256).astype(np.int64)
    nonzero = np.flatnonzero(hist)
    if len(nonzero) == 1:
        return int(nonzero[0])
    total = int(hist.sum())
    total_sum = int(np.dot(np.arange(256, dtype=np.int64), hist))
    # between-class variance at t is (w1*S0 - w0*S1)^2 / (w0*w1); compare
    # thresholds by cross-multiplying to stay in integers
    best_t = 0
    best_num = -1
    best_den = 1
    w0 = 0
    s0 = 0
    for t in range(256):
        w0 += int(hist[t])
        s0 += t * int(hist[t])
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            num, den = 0, 1
        else:
            num = (w1 * s0 - w0 * (total_sum - s0)) ** 2
            den = w0 * w1
        if num * best_den > best_num * den:
            best_num, best_den, best_t = num, den, t
    return best_t


def binarize(img: np.ndarray, t: int) -> np.ndarray:
    """Dark class is ink: mask[p] = pixels[p] <= t."""
    return as_gray(img) <= t


def _runs(row: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # start/end column indices (inclusive) of True runs in one row
    d = np.diff(row.astype(np.int8), prepend=np.int8(0), append=np.int8(0))
    return np.flatnonzero(d == 1), np.flatnonzero(d == -1) - 1


def connected_components(mask: np.ndarray) -> list[Component]:
    """Label 8-connected ink regions, sorted by x_min then y_min.

    Run-based two-pass labeling: ink runs are extracted per row and merged
    with the previous row's runs through a union-find; diagonal adjacency
    joins runs whose column intervals touch when widened by one.
    """
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise ToolkitError(f"expected 2-D mask, got shape {m.shape}")
    parent: list[int] = []

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    # per run: y, x_start, x_end
    runs_y: list[int] = []
    runs_s: list[int] = []
    runs_e: list[int] = []
    prev: list[int] = []  # indices of previous row's runs
    for y in range(m.shape[0]):
        starts, ends = _runs(m[y])
        cur: list[int] = []
        for s, e in zip(starts.tolist(), ends.tolist()):
            idx = len(parent)
            parent.append(idx)
            runs_y.append(y)
            runs_s.append(s)
            runs_e.append(e)
            cur.append(idx)
            # 8-connectivity: intervals [s-1, e+1] overlapping a previous run
            for p in prev:
                if runs_s[p] <= e + 1 and runs_e[p] >= s - 1:
                    union(idx, p)
        prev = cur

    boxes: dict[int, list[int]] = {}
    for i in range(len(parent)):
        r = find(i)
        b = boxes.get(r)
        s, e, y = runs_s[i], runs_e[i], runs_y[i]
        if b is None:
            boxes[r] = [s, e, y, y, e - s + 1]
        else:
            if s < b[0]:
                b[0] = s
            if e > b[1]:
                b[1] = e
            if y < b[2]:
                b[2] = y
            if y > b[3]:
                b[3] = y
            b[4] += e - s + 1
    comps = [
        Component(x_min=b[0], x_max=b[1], y_min=b[2], y_max=b[3], pixel_count=b[4])
        for b in boxes.values()
    ]
    comps.sort(key=lambda c: (c.x_min, c.y_min))
    return comps


def row_ink_extent(mask: np.ndarray) -> list[tuple[int, int] | None]:
    """Per row, the (leftmost, rightmost) ink columns, or None when blank."""
    m = np.asarray(mask, dtype=bool)
    out: list[tuple[int, int] | None] = []
    any_ink = m.any(axis=1)
    first = m.argmax(axis=1)
    last = m.shape[1] - 1 - m[:, ::-1].argmax(axis=1)
    for y in range(m.shape[0]):
        out.append((int(first[y]), int(last[y])) if any_ink[y] else None)
    return out


def column_ink_counts(mask: np.ndarray) -> np.ndarray:
    """Vertical projection: ink pixel count per column."""
    return np.asarray(mask, dtype=bool).sum(axis=0)
