"""Transcription backends and the label similarity used by the OCR gate.

Three backends share one interface: a precomputed-table file backend, an
HTTP backend speaking the recognizer wire contract (POST PNG bytes to
{base}/transcribe, JSON {"text", "confidence"} back), and a synthetic echo
backend for tests. Comparisons are case- and diacritic-sensitive.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import (
    BackendUnavailable,
    MissingTranscription,
    OcrError,
    ProtocolError,
    ToolkitError,
    UndecodableImage,
)
from .manifest import WordCrop, resolve_path
from .metrics import levenshtein


@dataclass
class OcrResult:
    text: str
    confidence: float | None = None

    def __post_init__(self):
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise ToolkitError(f"confidence {self.confidence} outside [0, 1]")


def similarity(a: str, b: str) -> float:
    """1 - levenshtein(a, b) / max(|a|, |b|), in [0, 1].

    Equals 1 iff the strings are identical; 0 when one side is empty and
    the other is not.
    """
    if a == b:
        return 1.0
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


class FileBackend:
    """Transcriptions precomputed into a JSONL table keyed by crop_id."""

    kind = "file"

    def __init__(self, table_path: str | Path):
        self.table: dict[str, OcrResult] = {}
        with open(table_path, "r", encoding="utf-8") as f:
            for ln, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                cid = str(obj["crop_id"])
                if cid in self.table:
                    raise ToolkitError(f"{table_path}:{ln}: duplicate crop_id {cid!r}")
                self.table[cid] = OcrResult(str(obj["text"]), obj.get("confidence"))

    def transcribe(self, crop: WordCrop, base_file=None) -> OcrResult:
        try:
            return self.table[crop.crop_id]
        except KeyError:
            raise MissingTranscription(f"no transcription for {crop.crop_id!r}") from None


class EchoBackend:
    """Deterministic synthetic recognizer.

    With noise 0 it echoes the label (confidence 1.0). With noise > 0 it
    corrupts a seeded fraction of crops by dropping the last character,
    which keeps gate decisions reproducible in tests.
    """

    kind = "echo"

    def __init__(self, noise: float = 0.0, seed: int = 0):
        self.noise = noise
        self.seed = seed

    def transcribe(self, crop: WordCrop, base_file=None) -> OcrResult:
        if self.noise > 0.0:
            rng = random.Random((self.seed, crop.crop_id).__repr__())
            if rng.random() < self.noise:
                return OcrResult(crop.label[:-1], 0.5)
        return OcrResult(crop.label, 1.0)


class HttpBackend:
    """POSTs crop PNG bytes to a recognizer service.

    5xx responses and connection errors are retried with exponential
    backoff; 422 means the service could not decode the image and the crop
    is held back; other failures raise BackendUnavailable.
    """

    kind = "http"

    def __init__(
        self,
        endpoint: str,
        timeout_s: float = 10.0,
        retries: int = 2,
        backoff_s: float = 0.2,
        session: requests.Session | None = None,
    ):
        if timeout_s <= 0:
            raise ToolkitError("http timeout must be > 0")
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s
        self.session = session or requests.Session()

    def transcribe(self, crop: WordCrop, base_file=None) -> OcrResult:
        path = resolve_path(base_file, crop.image) if base_file else Path(crop.image)
        payload = path.read_bytes()
        url = f"{self.endpoint}/transcribe"
        last_err: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self.session.post(
                    url,
                    data=payload,
                    headers={"Content-Type": "image/png"},
                    timeout=self.timeout_s,
                )
            except requests.RequestException as e:
                last_err = e
                time.sleep(self.backoff_s * (2**attempt))
                continue
            if resp.status_code == 200:
                return _parse_response(resp)
            if resp.status_code == 422:
                raise UndecodableImage(f"{crop.crop_id}: service rejected image bytes")
            if 500 <= resp.status_code < 600:
                last_err = BackendUnavailable(f"{url} returned {resp.status_code}")
                time.sleep(self.backoff_s * (2**attempt))
                continue
            raise BackendUnavailable(f"{url} returned {resp.status_code}")
        raise BackendUnavailable(f"{url} unreachable after {self.retries + 1} attempts: {last_err}")


def _parse_response(resp) -> OcrResult:
    try:
        obj = resp.json()
        return OcrResult(str(obj["text"]), obj.get("confidence"))
    except (ValueError, KeyError, TypeError, ToolkitError) as e:
        raise ProtocolError(f"malformed transcribe response: {e}") from e


def transcribe(backend, crop: WordCrop, base_file=None) -> OcrResult:
    return backend.transcribe(crop, base_file=base_file)


def transcribe_all(
    backend, crops: list[WordCrop], jobs: int = 1, base_file=None
) -> list[OcrResult | OcrError]:
    """Transcribe a batch, returning results in manifest order.

    Per-crop failures come back as the raised OcrError so callers can hold
    those crops back without aborting the batch. jobs bounds in-flight HTTP
    requests; file and echo backends just loop.
    """

    def one(crop: WordCrop):
        try:
            return backend.transcribe(crop, base_file=base_file)
        except OcrError as e:
            return e

    if jobs <= 1 or getattr(backend, "kind", "") != "http":
        return [one(c) for c in crops]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, crops))


def make_backend(run_cfg) -> FileBackend | EchoBackend | HttpBackend:
    """Instantiate the backend selected by a RunConfig."""
    if run_cfg.ocr_backend == "echo":
        return EchoBackend(seed=run_cfg.seed)
    if run_cfg.ocr_backend == "file":
        if not run_cfg.ocr_table:
            raise ToolkitError("file backend needs ocr_table")
        return FileBackend(run_cfg.ocr_table)
    if run_cfg.ocr_backend == "http":
        if not run_cfg.ocr_endpoint:
            raise ToolkitError("http backend needs ocr_endpoint")
        return HttpBackend(
            run_cfg.ocr_endpoint,
            timeout_s=run_cfg.ocr_timeout_s,
            retries=run_cfg.ocr_retries,
        )
    raise ToolkitError(f"unknown ocr backend {run_cfg.ocr_backend!r}")
