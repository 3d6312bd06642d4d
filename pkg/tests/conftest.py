from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tripatch.ingest import Intrinsics
from tripatch.triangulate import Mesh2D

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def K64() -> Intrinsics:
    return Intrinsics.centered(64, 64, 64.0)


def square_mesh(W: int, H: int) -> Mesh2D:
    """Frame split along the top-left to bottom-right diagonal."""
    verts = [[0, 0], [W, 0], [W, H], [0, H]]
    return Mesh2D(W, H, verts, [[0, 1], [1, 2], [2, 3], [3, 0]], [[0, 1, 2], [0, 2, 3]])


def random_mesh(rng: np.random.Generator, W: int, H: int, n_points: int = 30) -> Mesh2D:
    """CDT of the frame plus random interior points with float coordinates."""
    from tripatch.triangulate import build_constraints, triangulate_cdt

    v, s = build_constraints([], W, H, 0.0)
    pts = rng.uniform([0.5, 0.5], [W - 0.5, H - 0.5], size=(n_points, 2))
    return triangulate_cdt(np.vstack([v, pts]), s, W, H)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line, then fail the test if the criterion does not hold."""

    def check(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
