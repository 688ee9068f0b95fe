"""Shared fixtures: the server binary under test and its packaged data.

The SDK is exercised against the server package strictly from the outside:
its CLI binary over a socket, plus its installed data files (golden frames,
registry, trajectory feeds). No server-package code is imported.
"""

from __future__ import annotations

import importlib.util
import json
import subprocess
import sys
from pathlib import Path

import pytest


def server_package_dir() -> Path:
    spec = importlib.util.find_spec("etp")
    if spec is None or not spec.submodule_search_locations:
        raise RuntimeError("the server package must be installed to run SDK tests")
    return Path(list(spec.submodule_search_locations)[0])


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return server_package_dir() / "fixtures"


@pytest.fixture(scope="session")
def golden_dir(data_dir: Path) -> Path:
    return data_dir / "golden"


@pytest.fixture(scope="session")
def registry_cards(data_dir: Path) -> list[dict]:
    return json.loads((data_dir / "registry_112.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def trajectory_dir(data_dir: Path) -> Path:
    return data_dir / "trajectories"


def load_feed(trajectory_dir: Path, episode_ids: list[str]) -> list[dict]:
    return [
        json.loads((trajectory_dir / f"{episode_id}.json").read_text(encoding="utf-8"))
        for episode_id in episode_ids
    ]


def start_server(*extra_args: str) -> tuple[subprocess.Popen, str]:
    proc = subprocess.Popen(
        [sys.executable, "-m", "etp.cli", "serve", "--addr", "127.0.0.1:0", *extra_args],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
    )
    line = proc.stdout.readline()
    if "listening on" not in line:
        proc.terminate()
        raise RuntimeError(f"server did not start: {line!r}")
    return proc, line.strip().rsplit(" ", 1)[-1]


@pytest.fixture(scope="module")
def server():
    proc, addr = start_server()
    yield addr
    proc.terminate()
    proc.wait(timeout=10)
