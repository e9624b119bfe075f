"""Service configuration."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ServiceConfigError

MODES = ("fixture", "model")


@dataclass
class ServiceConfig:
    """Where to listen and which recognizer to serve.

    Fixture mode needs a digest table; model mode needs a checkpoint
    identifier. The two requirements are checked up front so a bad
    deployment fails at startup, not on the first request.
    """

    host: str = "127.0.0.1"
    port: int = 8080
    mode: str = "fixture"
    table: str = ""
    model_id: str = ""
    log_level: str = "INFO"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ServiceConfigError(
                f"unknown mode {self.mode!r}, expected one of {MODES}"
            )
        if self.mode == "fixture" and not self.table:
            raise ServiceConfigError("fixture mode needs a fixture table path")
        if self.mode == "model" and not self.model_id:
            raise ServiceConfigError("model mode needs a model identifier")
        if not (0 <= self.port <= 65535):
            raise ServiceConfigError(f"port {self.port} outside [0, 65535]")
