"""Image decoding, content digests, and the two recognizer back ends.

The fixture recognizer answers from a JSONL table keyed by a digest of the
*decoded* image content (mode, size, pixel bytes), so the same pixels match
no matter which PNG encoder produced the upload and no matter what the file
was called. The model recognizer wraps a TrOCR-style vision-encoder-decoder
checkpoint and is only importable when the optional model extra is
installed.
"""

from __future__ import annotations

import hashlib
import io
import json
import threading
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .errors import ServiceConfigError, UndecodableUpload


def decode_image(data: bytes) -> Image.Image:
    """Decode request bytes as a PNG image, fully loading the pixel data.

    Anything that is not a complete, well-formed PNG (other formats,
    truncated payloads, arbitrary bytes) raises UndecodableUpload.
    """
    try:
        img = Image.open(io.BytesIO(data))
        fmt = img.format
        img.load()
    except Exception as e:
        raise UndecodableUpload(f"body does not decode as an image: {e}") from e
    if fmt != "PNG":
        raise UndecodableUpload(f"expected PNG bytes, got {fmt or 'unknown format'}")
    return img


def image_digest(img: Image.Image) -> str:
    """sha256 over the decoded content: mode, dimensions, and pixel bytes.

    Dimensions are part of the digest so that images whose flat pixel
    buffers coincide but whose shapes differ never collide.
    """
    h = hashlib.sha256()
    h.update(f"{img.mode}:{img.width}x{img.height}:".encode("ascii"))
    h.update(img.tobytes())
    return h.hexdigest()


def digest_file(path: str | Path) -> str:
    """Digest of an image file on disk (same value the service computes)."""
    return image_digest(decode_image(Path(path).read_bytes()))


@dataclass
class FixtureEntry:
    text: str
    confidence: float | None = None


def load_fixture_table(path: str | Path) -> dict[str, FixtureEntry]:
    """Load a JSONL table of {"digest", "text", "confidence"?} rows.

    Blank lines are skipped; duplicate digests and out-of-range confidences
    are configuration errors.
    """
    table: dict[str, FixtureEntry] = {}
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                digest = str(obj["digest"])
                entry = FixtureEntry(str(obj["text"]), obj.get("confidence"))
            except (ValueError, KeyError, TypeError) as e:
                raise ServiceConfigError(f"{path}:{ln}: bad fixture row: {e}") from e
            if entry.confidence is not None:
                if not isinstance(entry.confidence, (int, float)) or not (
                    0.0 <= entry.confidence <= 1.0
                ):
                    raise ServiceConfigError(
                        f"{path}:{ln}: confidence {entry.confidence!r} outside [0, 1]"
                    )
            if digest in table:
                raise ServiceConfigError(f"{path}:{ln}: duplicate digest {digest!r}")
            table[digest] = entry
    return table


class FixtureRecognizer:
    """Deterministic table lookup: identical bytes in, identical answer out.

    A digest miss is a successful transcription of empty text with
    confidence 0, which downstream length-stratified gates reject for all
    but the shortest labels.
    """

    mode = "fixture"

    def __init__(self, table: dict[str, FixtureEntry]):
        self.table = table

    def transcribe(self, img: Image.Image) -> tuple[str, float | None]:
        entry = self.table.get(image_digest(img))
        if entry is None:
            return "", 0.0
        return entry.text, entry.confidence


class ModelRecognizer:
    """TrOCR-style checkpoint behind the same transcribe() interface.

    Inference is serialized with a lock so concurrent requests stay safe;
    confidence is the mean probability of the generated tokens.
    """

    mode = "model"

    def __init__(self, model_id: str):
        try:
            import torch  # noqa: F401
            from transformers import TrOCRProcessor, VisionEncoderDecoderModel
        except ImportError as e:
            raise ServiceConfigError(
                "model mode needs the optional model dependencies "
                "(install the 'model' extra)"
            ) from e
        self.processor = TrOCRProcessor.from_pretrained(model_id)
        self.model = VisionEncoderDecoderModel.from_pretrained(model_id)
        self.model.eval()
        self._lock = threading.Lock()

    def transcribe(self, img: Image.Image) -> tuple[str, float | None]:
        import torch

        with self._lock, torch.no_grad():
            inputs = self.processor(images=img.convert("RGB"), return_tensors="pt")
            out = self.model.generate(
                inputs.pixel_values,
                output_scores=True,
                return_dict_in_generate=True,
            )
            text = self.processor.batch_decode(
                out.sequences, skip_special_tokens=True
            )[0]
            probs = [
                torch.softmax(step, dim=-1)[0, tok].item()
                for step, tok in zip(out.scores, out.sequences[0, 1:])
            ]
        confidence = sum(probs) / len(probs) if probs else 0.0
        return text, min(1.0, max(0.0, confidence))
