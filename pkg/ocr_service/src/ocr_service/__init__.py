"""HTTP recognizer service for word-crop images.

POST /transcribe takes raw PNG bytes and returns {"text", "confidence"};
GET /healthz returns "ok". Fixture mode answers from a digest-keyed table
and is bit-deterministic; model mode wraps a TrOCR-style recognizer.
"""

__version__ = "0.1.0"

from .app import create_app
from .config import ServiceConfig
from .errors import ServiceConfigError, ServiceError, UndecodableUpload
from .recognizer import (
    FixtureRecognizer,
    decode_image,
    image_digest,
    load_fixture_table,
)

__all__ = [
    "FixtureRecognizer",
    "ServiceConfig",
    "ServiceConfigError",
    "ServiceError",
    "UndecodableUpload",
    "create_app",
    "decode_image",
    "image_digest",
    "load_fixture_table",
    "__version__",
]
