import math

import numpy as np
import pytest

from mstct.geometry import ScanGeometry, reference_geometry


@pytest.fixture
def ref_geom():
    return reference_geometry()


@pytest.fixture
def small_geom():
    """Reference proportions with a coarse detector and few sources, for fast tests."""
    return ScanGeometry(
        l=15.0,
        h=190.0,
        s=10.0,
        detector_count=256,
        detector_pitch=0.508,
        sources_per_stct=81,
        stct_count=5,
        theta_0=0.0,
        delta_theta=math.radians(36.5),
    )


def rel_l2(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


ACCEPTANCE_LINES: list[str] = []


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
