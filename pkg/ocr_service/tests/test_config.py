"""ServiceConfig validation."""

import pytest

from ocr_service import ServiceConfig
from ocr_service.errors import ServiceConfigError


def test_fixture_mode_defaults_are_valid():
    cfg = ServiceConfig(table="table.jsonl")
    assert cfg.host == "127.0.0.1"
    assert cfg.port == 8080
    assert cfg.mode == "fixture"


def test_unknown_mode_rejected():
    with pytest.raises(ServiceConfigError, match="unknown mode"):
        ServiceConfig(mode="oracle", table="t.jsonl")


def test_fixture_mode_requires_table():
    with pytest.raises(ServiceConfigError, match="fixture table"):
        ServiceConfig(mode="fixture")


def test_model_mode_requires_model_id():
    with pytest.raises(ServiceConfigError, match="model identifier"):
        ServiceConfig(mode="model")


def test_model_mode_with_id_is_valid():
    cfg = ServiceConfig(mode="model", model_id="some/checkpoint")
    assert cfg.model_id == "some/checkpoint"


@pytest.mark.parametrize("port", [-1, 65536])
def test_port_out_of_range_rejected(port):
    with pytest.raises(ServiceConfigError, match="port"):
        ServiceConfig(table="t.jsonl", port=port)
