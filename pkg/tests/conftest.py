import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from multicalib import GroupCollection, ScoredDataset  # noqa: E402


def make_data(scores, labels, masks=None, names=None, logits=None):
    scores = np.asarray(scores, dtype=float)
    if masks is None:
        masks = np.ones((scores.size, 1), dtype=bool)
    masks = np.asarray(masks, dtype=bool)
    names = tuple(names or (f"g{i}" for i in range(masks.shape[1])))
    data = ScoredDataset(scores, np.asarray(labels), logits=logits, group_masks=masks, group_names=names)
    return data, GroupCollection(names, masks)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
