import numpy as np
import pytest

from rtfsnet import model
from rtfsnet.config import ModelConfig

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_config():
    """A narrow network that keeps every structural feature of the default one."""
    return ModelConfig(window=64, hop=32, audio_channels=16, block_channels=8, sru_hidden=8,
                       visual_channels=32, vp_hidden=16, vp_ffn=32, num_blocks=3)


@pytest.fixture(scope="session")
def small_graph(small_config):
    return model.build(small_config, seed=7)


@pytest.fixture(scope="session")
def default_graph():
    return model.build(ModelConfig(), seed=0)
