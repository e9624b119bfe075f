"""Data records passed between pipeline stages, and their JSONL formats.

A line corpus is one JSON object per line: {"line_id", "writer_id", "image",
"transcript", "gt_spans"?}. A word manifest is one WordCrop object per line,
optionally preceded by a {"_manifest": {...}} provenance header. Image paths
are stored relative to the file that references them.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ToolkitError
from .fsio import atomic_write_text


@dataclass
class WordSpan:
    """Left/right pixel columns delimiting one word in a line, inclusive."""

    x_left: int
    x_right: int

    def as_pair(self) -> list[int]:
        return [self.x_left, self.x_right]


@dataclass
class LineRecord:
    """One source line: scan image, writer id, transcription."""

    line_id: str
    writer_id: str
    image: str  # path, resolved relative to the corpus file
    transcript: str
    gt_spans: list[WordSpan] | None = None

    def __post_init__(self):
        if not self.transcript.strip():
            raise ToolkitError(f"line {self.line_id}: empty transcript")

    @property
    def tokens(self) -> list[str]:
        return self.transcript.split()

    @property
    def word_count(self) -> int:
        return len(self.tokens)


@dataclass
class WordCrop:
    """One segmented word image plus its bookkeeping."""

    crop_id: str
    writer_id: str
    label: str
    raw_label: str
    image: str
    width: int
    height: int
    line_id: str = ""
    word_index: int = 0
    repeat_index: int = 0
    stripped: str = ""  # trailing punctuation removed by normalization

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "WordCrop":
        return cls(**d)


@dataclass
class Manifest:
    """Ordered collection of WordCrop records with provenance metadata."""

    crops: list[WordCrop] = field(default_factory=list)
    source_id: str = ""
    stage: str = ""
    config_hash: str = ""

    def __len__(self) -> int:
        return len(self.crops)

    def __iter__(self):
        return iter(self.crops)

    def check_unique_ids(self) -> None:
        seen = set()
        for c in self.crops:
            if c.crop_id in seen:
                raise ToolkitError(f"duplicate crop_id {c.crop_id!r}")
            seen.add(c.crop_id)

    def writer_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for c in self.crops:
            counts[c.writer_id] = counts.get(c.writer_id, 0) + 1
        return counts


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    meta = {
        "source_id": manifest.source_id,
        "stage": manifest.stage,
        "config_hash": manifest.config_hash,
    }
    out = [json.dumps({"_manifest": meta}, ensure_ascii=False, sort_keys=True)]
    for crop in manifest.crops:
        out.append(json.dumps(crop.to_json(), ensure_ascii=False, sort_keys=True))
    atomic_write_text(path, "\n".join(out) + "\n")


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    manifest = Manifest()
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "_manifest" in obj:
                meta = obj["_manifest"]
                manifest.source_id = meta.get("source_id", "")
                manifest.stage = meta.get("stage", "")
                manifest.config_hash = meta.get("config_hash", "")
                continue
            try:
                manifest.crops.append(WordCrop.from_json(obj))
            except TypeError as e:
                raise ToolkitError(f"{path}:{ln}: bad crop record: {e}") from e
    manifest.check_unique_ids()
    return manifest


def load_corpus(path: str | Path) -> list[LineRecord]:
    """Read a line corpus; image paths stay relative to the corpus file."""
    path = Path(path)
    lines: list[LineRecord] = []
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            spans = obj.get("gt_spans")
            gt = [WordSpan(int(a), int(b)) for a, b in spans] if spans is not None else None
            try:
                lines.append(
                    LineRecord(
                        line_id=str(obj["line_id"]),
                        writer_id=str(obj["writer_id"]),
                        image=str(obj["image"]),
                        transcript=str(obj["transcript"]),
                        gt_spans=gt,
                    )
                )
            except KeyError as e:
                raise ToolkitError(f"{path}:{ln}: missing corpus field {e}") from e
    return lines


def save_corpus(lines: list[LineRecord], path: str | Path) -> None:
    out = []
    for rec in lines:
        obj = {
            "line_id": rec.line_id,
            "writer_id": rec.writer_id,
            "image": rec.image,
            "transcript": rec.transcript,
        }
        if rec.gt_spans is not None:
            obj["gt_spans"] = [s.as_pair() for s in rec.gt_spans]
        out.append(json.dumps(obj, ensure_ascii=False, sort_keys=True))
    atomic_write_text(path, "\n".join(out) + "\n")


def resolve_path(base_file: str | Path, rel: str) -> Path:
    """Resolve an image path stored relative to its manifest/corpus file."""
    p = Path(rel)
    return p if p.is_absolute() else Path(base_file).parent / p
