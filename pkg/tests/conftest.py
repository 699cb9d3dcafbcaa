import time
from pathlib import Path

import numpy as np
import pytest

from samba_seg import cli
from samba_seg.tensor import default_dtype

REPO = Path(__file__).resolve().parents[1]
TOY_ROOT = REPO / "data" / "toy"
TOY_CONFIG = REPO / "configs" / "toy.cfg"

# criterion results collected by test_acceptance, printed in the summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def f64():
    with default_dtype(np.float64):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_run(tmp_path_factory):
    """One full training run of the bundled toy config, shared across tests."""
    out = tmp_path_factory.mktemp("toy_run")
    start = time.perf_counter()
    code = cli.main(["train", "--config", str(TOY_CONFIG), "--output.dir", str(out)])
    return {"dir": out, "code": code, "seconds": time.perf_counter() - start}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
