import numpy as np
import pytest

from dotswarm.world import SpawnConfig, spawn


def make_world(robots, carriers=()):
    """World with robots and carriers at explicit (x, y, theta) poses."""
    cfg = SpawnConfig(robots=len(robots), carriers=len(carriers), robot_poses=list(robots),
                      carrier_poses=list(carriers))
    return spawn(cfg, np.random.default_rng(0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
