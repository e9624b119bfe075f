"""Legibility and distribution metrics.

Character error rate is total edit distance over total reference length,
reported micro, writer-macro, and split by length bucket, vocabulary
membership, and rare-letter content. The distribution metric is the Frechet
distance between Gaussians fitted to two embedding sets; the embeddings
themselves come from an external feature extractor.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RARE_LETTERS
from .errors import DimensionMismatch, InvalidSample, NotSymmetric, ToolkitError
from .fsio import atomic_write_bytes, atomic_write_text

LENGTH_BUCKETS = ((1, 3), (4, 6), (7, 9), (10, None))


def levenshtein(a: str, b: str) -> int:
    """Minimal code-point insertions, deletions and substitutions a -> b."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, 1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (ca != cb),
            )
        prev = cur
    return prev[-1]


def length_bucket(n: int) -> str:
    for lo, hi in LENGTH_BUCKETS:
        if n >= lo and (hi is None or n <= hi):
            return f"{lo}_{hi}" if hi is not None else f"{lo}_plus"
    raise ValueError(f"no length bucket for {n}")


@dataclass
class CerSample:
    crop_id: str
    writer_id: str
    reference: str
    hypothesis: str
    in_vocabulary: bool = True
    rare_letters: tuple[str, ...] = RARE_LETTERS

    def __post_init__(self):
        if not self.reference:
            raise InvalidSample(f"sample {self.crop_id}: empty reference")

    @property
    def contains_rare_letter(self) -> bool:
        return any(ch in self.reference for ch in self.rare_letters)

    @property
    def bucket(self) -> str:
        return length_bucket(len(self.reference))


@dataclass
class CerCell:
    samples: int
    cer: float


@dataclass
class CerReport:
    micro_cer: float
    writer_macro_cer: float
    overall: CerCell
    in_vocabulary: CerCell
    out_of_vocabulary: CerCell
    rare_letter: CerCell
    common_letter: CerCell
    length_1_3: CerCell
    length_4_6: CerCell
    length_7_9: CerCell
    length_10_plus: CerCell
    per_writer: dict[str, CerCell]

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        return d


def _micro(samples: list[CerSample]) -> CerCell:
    if not samples:
        return CerCell(samples=0, cer=0.0)
    dist = sum(levenshtein(s.reference, s.hypothesis) for s in samples)
    ref_len = sum(len(s.reference) for s in samples)
    return CerCell(samples=len(samples), cer=dist / ref_len)


def cer(samples: list[CerSample]) -> CerReport:
    """Aggregate CER report. CER can exceed 1; it is not capped."""
    if not samples:
        raise InvalidSample("no samples")
    by_writer: dict[str, list[CerSample]] = {}
    for s in samples:
        by_writer.setdefault(s.writer_id, []).append(s)
    per_writer = {w: _micro(ss) for w, ss in sorted(by_writer.items())}
    macro = sum(c.cer for c in per_writer.values()) / len(per_writer)
    buckets = {f"{lo}_{hi}" if hi else f"{lo}_plus": [] for lo, hi in LENGTH_BUCKETS}
    for s in samples:
        buckets[s.bucket].append(s)
    return CerReport(
        micro_cer=_micro(samples).cer,
        writer_macro_cer=macro,
        overall=_micro(samples),
        in_vocabulary=_micro([s for s in samples if s.in_vocabulary]),
        out_of_vocabulary=_micro([s for s in samples if not s.in_vocabulary]),
        rare_letter=_micro([s for s in samples if s.contains_rare_letter]),
        common_letter=_micro([s for s in samples if not s.contains_rare_letter]),
        length_1_3=_micro(buckets["1_3"]),
        length_4_6=_micro(buckets["4_6"]),
        length_7_9=_micro(buckets["7_9"]),
        length_10_plus=_micro(buckets["10_plus"]),
        per_writer=per_writer,
    )


class EmbeddingSet:
    """Fixed-dimension feature vectors with derived mean and covariance."""

    def __init__(self, vectors: np.ndarray, unbiased: bool = True):
        v = np.asarray(vectors, dtype=np.float64)
        if v.ndim != 2:
            raise ToolkitError(f"expected n x d matrix, got shape {v.shape}")
        if v.shape[0] < 2:
            raise ToolkitError("embedding set needs at least 2 vectors")
        self.vectors = v
        self.mean = v.mean(axis=0)
        self.cov = np.cov(v, rowvar=False, ddof=1 if unbiased else 0)
        self.cov = np.atleast_2d(self.cov)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def matrix_sqrt_psd(m: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues below zero (numerical noise) are clamped to zero. Raises
    NotSymmetric when the input is asymmetric beyond tol.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ToolkitError(f"expected square matrix, got shape {m.shape}")
    asym = np.abs(m - m.T).max() if m.size else 0.0
    if asym > tol:
        raise NotSymmetric(f"asymmetry {asym:.3e} exceeds tolerance {tol:.0e}")
    sym = (m + m.T) / 2.0
    w, v = np.linalg.eigh(sym)
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.T
    return (root + root.T) / 2.0


def frechet_distance(p: EmbeddingSet, q: EmbeddingSet) -> float:
    """||mu_p - mu_q||^2 + Tr(S_p + S_q - 2 (S_p S_q)^{1/2}), floored at 0.

    The product square root is computed in symmetrized form
    sqrt(sqrt(S_p) S_q sqrt(S_p)), which has the same trace for PSD inputs
    and keeps the eigenproblem symmetric.
    """
    if p.dim != q.dim:
        raise DimensionMismatch(f"dimension {p.dim} vs {q.dim}")
    diff = p.mean - q.mean
    root_p = matrix_sqrt_psd(p.cov)
    inner = root_p @ q.cov @ root_p
    cross = matrix_sqrt_psd(inner)
    fd = float(diff @ diff + np.trace(p.cov) + np.trace(q.cov) - 2.0 * np.trace(cross))
    return max(fd, 0.0)


def load_cer_samples(path: str | Path) -> list[CerSample]:
    """Read JSON-lines reference/hypothesis pairs.

    Each line: {"crop_id","writer_id","reference","hypothesis","in_vocabulary"}.
    """
    samples = []
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            if not line.strip():
                continue
            d = json.loads(line)
            try:
                samples.append(
                    CerSample(
                        crop_id=d["crop_id"],
                        writer_id=d["writer_id"],
                        reference=d["reference"],
                        hypothesis=d["hypothesis"],
                        in_vocabulary=bool(d.get("in_vocabulary", True)),
                    )
                )
            except KeyError as e:
                raise ToolkitError(f"{path}:{ln}: missing field {e}") from e
    return samples


def load_embeddings(path: str | Path, unbiased: bool = True) -> EmbeddingSet:
    """Read an embedding matrix file.

    The file starts with a header line "d n". Text files follow with n
    rows of d decimal numbers; binary files follow with n*d little-endian
    float64 values row-major. The mode is detected from the payload size.
    """
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ToolkitError(f"{path}: missing header line")
    try:
        d, n = (int(x) for x in raw[:nl].split())
    except ValueError as e:
        raise ToolkitError(f"{path}: header must be 'd n'") from e
    payload = raw[nl + 1 :]
    if len(payload) == 8 * d * n:
        mat = np.frombuffer(payload, dtype="<f8").reshape(n, d)
    else:
        mat = np.loadtxt(path, skiprows=1, dtype=np.float64, ndmin=2)
        if mat.shape != (n, d):
            raise ToolkitError(f"{path}: expected {n}x{d} matrix, got {mat.shape}")
    return EmbeddingSet(mat, unbiased=unbiased)


def save_embeddings_text(vectors: np.ndarray, path: str | Path) -> None:
    v = np.asarray(vectors, dtype=np.float64)
    lines = [f"{v.shape[1]} {v.shape[0]}"]
    lines.extend(" ".join(repr(float(x)) for x in row) for row in v)
    atomic_write_text(path, "\n".join(lines) + "\n")


def save_embeddings_binary(vectors: np.ndarray, path: str | Path) -> None:
    v = np.asarray(vectors, dtype="<f8")
    header = f"{v.shape[1]} {v.shape[0]}\n".encode("ascii")
    atomic_write_bytes(path, header + v.tobytes(order="C"))
