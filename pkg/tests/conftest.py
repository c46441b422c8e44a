import zlib

import numpy as np
import pytest


@pytest.fixture
def rng(request):
    # per-test stream so adding tests never changes another test's data;
    # crc32 rather than hash(), which is salted per process
    return np.random.default_rng(zlib.crc32(request.node.nodeid.encode()))


def rel(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


# one line per acceptance criterion, echoed at the end of the run
CRITERIA_LINES = []


def record_criterion(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  criterion {number}: {detail}"
    CRITERIA_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
