import numpy as np
import pytest

from patternsim import ConsumptionPattern, make_rng

# Filled by test_acceptance; echoed in the terminal summary so the per-criterion
# verdicts show up even when pytest captures stdout.
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def blobs(n_blobs, dim=16, per_blob=20, std=0.05, spacing=2.0, seed=0):
    """Gaussian blobs whose centres sit ``spacing`` apart along distinct axes."""
    rng = np.random.default_rng(seed)
    points, labels = [], []
    for b in range(n_blobs):
        center = np.zeros(dim)
        center[b % dim] = spacing * (b + 1)
        points.append(center + std * rng.standard_normal((per_blob, dim)))
        labels += [b] * per_blob
    return np.vstack(points), np.array(labels)


def random_pattern(rng, length=10, n_classes=5):
    """Uniform draws over ``n_classes`` names; at least two distinct classes."""
    names = [f"c{i}" for i in range(n_classes)]
    while True:
        ev = rng.integers(n_classes, size=length)
        if len(set(ev.tolist())) >= 2:
            return ConsumptionPattern.from_names([names[e] for e in ev])


@pytest.fixture
def rng():
    return make_rng(12345)
