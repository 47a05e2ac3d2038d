import numpy as np
import pytest

from crossmap.data import PairedDataset, VectorSet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_paired(n=40, d_x=5, d_y=4, seed=0, labels=True):
    r = np.random.default_rng(seed)
    x = VectorSet.from_array(r.standard_normal((n, d_x)))
    y = VectorSet(x.keys, r.standard_normal((n, d_y)))
    lab = tuple(f"c{i % 4}" for i in range(n)) if labels else None
    return PairedDataset(x, y, lab)


from hypothesis import settings  # noqa: E402

# the CI box is slow and single-core; wall-clock deadlines only add flakiness
settings.register_profile("default", deadline=None)
settings.load_profile("default")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
