import numpy as np
import pytest

from vgwarp.geometry import Partition


def random_partition(rng, n_boxes, lo=0.0, hi=2.0):
    """Guillotine partition of ``[lo, hi]^2`` into ``n_boxes`` boxes."""
    boxes = [np.array([[lo, hi], [lo, hi]])]
    while len(boxes) < n_boxes:
        i = int(rng.integers(len(boxes)))
        b = boxes.pop(i)
        axis = int(rng.integers(2))
        cut = b[axis, 0] + rng.uniform(0.2, 0.8) * (b[axis, 1] - b[axis, 0])
        left, right = b.copy(), b.copy()
        left[axis, 1] = cut
        right[axis, 0] = cut
        boxes += [left, right]
    return Partition(np.array(boxes))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_regions():
    return Partition.from_splits([0.0, 1.0, 2.0], [0.0, 2.0])


ACCEPTANCE = []


def report(criterion, ok, detail):
    """Record and print one acceptance line."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
