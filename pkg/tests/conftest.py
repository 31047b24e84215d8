import numpy as np
import pytest

from subband_se.model import EnhancerNet, ModelConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_cfg():
    """Real STFT size (257 bins) but narrow layers so tests stay fast."""
    return ModelConfig(bottleneck=8, hidden=8, mulca_reduction=16, train_frames=12)


@pytest.fixture
def small_net(small_cfg):
    return EnhancerNet(small_cfg)


@pytest.fixture(scope="session")
def mini_cfg():
    return ModelConfig.miniature()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
