import numpy as np
import pytest

from socialcue.camera import CameraIntrinsics
from socialcue.headpose import default_face_model


@pytest.fixture
def cam():
    return CameraIntrinsics()


@pytest.fixture
def model():
    return default_face_model()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line; printed at the end of the session."""

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
