import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from plcmimic.config import ProtocolConfig

import reporting


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    for line in reporting.lines:
        terminalreporter.write_line(line)


@pytest.fixture
def cfg():
    return ProtocolConfig()


@pytest.fixture
def s7_cfg():
    return ProtocolConfig(protocol="s7comm", functions=[4, 5])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
