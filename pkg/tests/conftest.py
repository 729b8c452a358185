import json
from importlib import resources
from pathlib import Path

import pytest

from finprompt import harness


def fixtures_dir() -> Path:
    return Path(resources.files("finprompt") / "fixtures")


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return fixtures_dir()


@pytest.fixture(scope="session")
def fixture_config():
    return harness.load_config(fixtures_dir() / "config.json")


@pytest.fixture(scope="session")
def fixture_corpus(fixture_config):
    """(news, split, pool, knowledge) loaded once from the bundled fixture."""
    return harness.prepare_corpus(fixture_config)


@pytest.fixture
def make_config(tmp_path):
    """Write a config JSON that points at the bundled fixture data, with
    overrides merged on top, and load it."""

    def _make(**overrides):
        fdir = fixtures_dir()
        raw = json.loads((fdir / "config.json").read_text(encoding="utf-8"))
        for key in ("news", "prices", "exemplars", "knowledge"):
            raw[key]["path"] = str(fdir / raw[key]["path"])
        raw["provider"]["rulebook"] = str(fdir / raw["provider"]["rulebook"])
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(raw.get(key), dict):
                raw[key].update(value)
            else:
                raw[key] = value
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(raw), encoding="utf-8")
        return harness.load_config(config_path)

    return _make
