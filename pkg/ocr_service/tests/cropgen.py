"""Deterministic 50-crop contract fixture shared by the round-trip tests.

Fifty labelled word crops cover the three label-length bands of the
curation gate (<=3, 4-5, 6+) crossed with four transcription qualities:
exact, one character off, fully garbled, and absent from the service table
(a digest miss, which the service answers with empty text). The file-
backend table carries the very same texts keyed by crop_id — with empty
text for the misses — so both backends see identical transcriptions and
their gate decisions must coincide.
"""

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ocr_service import image_digest
from ukrwords.manifest import Manifest, WordCrop

SHORT = ["і", "не", "так", "він", "ми"]
MID = ["воля", "мрія", "слово", "книга", "поле"]
LONG = [
    "фабрика",
    "держава",
    "громада",
    "історія",
    "затишок",
    "джерело",
    "пшениця",
    "вересень",
    "соловей",
    "веселка",
]

KINDS = ("exact", "near", "garble", "miss", "exact")

N_CROPS = 50
CROP_W, CROP_H = 40, 60


def labels_50() -> list[str]:
    return SHORT * 4 + MID * 4 + LONG


def transcription(i: int, label: str) -> str | None:
    """Designed service answer for crop i; None = not in the digest table."""
    kind = KINDS[i % 5]
    if kind == "exact":
        return label
    if kind == "near":
        return label[:-1] + ("й" if label[-1] != "й" else "ж")
    if kind == "garble":
        return "ь" * len(label)
    return None


def crop_image(i: int) -> Image.Image:
    rng = np.random.default_rng(i)
    arr = rng.integers(0, 256, size=(CROP_H, CROP_W), dtype=np.uint8)
    return Image.fromarray(arr)


def png_bytes(img: Image.Image, **save_kw) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format="PNG", **save_kw)
    return buf.getvalue()


def write_table(path: Path, rows: list[dict]) -> Path:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


@dataclass
class ContractFixture:
    root: Path
    records: list[dict]  # crop_id, writer_id, label, image, text (None = miss)
    http_table: Path
    file_table: Path

    def make_manifest(self) -> Manifest:
        """Fresh crop objects each call, so pipeline runs never share state."""
        crops = [
            WordCrop(
                crop_id=r["crop_id"],
                writer_id=r["writer_id"],
                label=r["label"],
                raw_label=r["label"],
                image=r["image"],
                width=CROP_W,
                height=CROP_H,
            )
            for r in self.records
        ]
        return Manifest(crops=crops, source_id="contract-fixture", stage="segmented")


def build_contract_fixture(root: Path) -> ContractFixture:
    crops_dir = root / "crops"
    crops_dir.mkdir(parents=True, exist_ok=True)
    records = []
    http_rows = []
    file_rows = []
    for i, label in enumerate(labels_50()):
        img = crop_image(i)
        path = crops_dir / f"c{i:03d}.png"
        path.write_bytes(png_bytes(img))
        text = transcription(i, label)
        if text is not None:
            http_rows.append(
                {"digest": image_digest(img), "text": text, "confidence": 0.93}
            )
            file_rows.append({"crop_id": f"c{i:03d}", "text": text, "confidence": 0.93})
        else:
            # digest miss: the service falls back to empty text, so the
            # file table must say "" explicitly to carry the same answer
            file_rows.append({"crop_id": f"c{i:03d}", "text": "", "confidence": 0.0})
        records.append(
            {
                "crop_id": f"c{i:03d}",
                "writer_id": f"w{i % 5:02d}",
                "label": label,
                "image": str(path),
                "text": text,
            }
        )
    return ContractFixture(
        root=root,
        records=records,
        http_table=write_table(root / "http_table.jsonl", http_rows),
        file_table=write_table(root / "file_table.jsonl", file_rows),
    )
