"""Shared fixtures: a real HTTP server on an ephemeral port, plus the
acceptance-suite summary lines.

Tests talk to the service over actual sockets so the whole stack (routing,
body handling, status codes, concurrency) is exercised, not just the
handler functions.
"""

import threading
import time

import pytest
import uvicorn

from ocr_service import create_app

ACCEPTANCE_LABELS = {
    "test_s01_contract_roundtrip": (
        "http gate decisions == file-backend decisions on 50 crops; "
        "undecodable upload -> 422 and held back"
    ),
}


class LiveServer:
    """uvicorn in a daemon thread, bound to an ephemeral port."""

    def __init__(self, app):
        self._server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        )
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def start(self) -> str:
        self._thread.start()
        deadline = time.time() + 15
        while not self._server.started:
            if not self._thread.is_alive():
                raise RuntimeError("service thread died during startup")
            if time.time() > deadline:
                raise RuntimeError("service did not start within 15 s")
            time.sleep(0.01)
        port = self._server.servers[0].sockets[0].getsockname()[1]
        return f"http://127.0.0.1:{port}"

    def stop(self):
        self._server.should_exit = True
        self._thread.join(timeout=15)


@pytest.fixture
def serve():
    """Factory fixture: start a service for a config, return its base URL."""
    running = []

    def start(cfg) -> str:
        srv = LiveServer(create_app(cfg))
        running.append(srv)
        return srv.start()

    yield start
    while running:
        running.pop().stop()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call":
                continue
            name = rep.nodeid.split("::")[-1].split("[")[0]
            if "test_acceptance.py" in rep.nodeid and name in ACCEPTANCE_LABELS:
                lines.append((name, outcome == "passed"))
    if not lines:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for name, ok in sorted(lines):
        label = ACCEPTANCE_LABELS[name]
        if ok:
            tr.write_line(f"PASS  {label}", green=True)
        else:
            tr.write_line(f"FAIL  {label}", red=True)
