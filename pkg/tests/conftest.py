import time
from pathlib import Path

import pytest

from discfol import pipeline
from discfol.config import load_config

ACCEPTANCE = []  # (number, name, passed, detail), filled by test_acceptance.py

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_CONFIG = ROOT / "configs" / "default.toml"


@pytest.fixture(scope="session")
def default_cfg():
    return load_config(DEFAULT_CONFIG)


@pytest.fixture(scope="session")
def default_run(tmp_path_factory, default_cfg):
    """One full default pipeline run shared by the slow tests."""
    out = tmp_path_factory.mktemp("default_run")
    t0 = time.perf_counter()
    code = pipeline.run_pipeline(default_cfg, out)
    return out, code, time.perf_counter() - t0


@pytest.fixture(scope="session")
def default_lab(default_run):
    return pipeline.load_labyrinth(default_run[0])


@pytest.fixture(scope="session")
def default_state(default_run, default_lab, default_cfg):
    return pipeline.load_state(default_run[0], default_lab, default_cfg)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {name}: {detail}")
