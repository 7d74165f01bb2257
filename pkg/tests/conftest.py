import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spikenas.arch import MacroConfig
from spikenas.data import synth_dataset
from spikenas.snn import LIFParams


@pytest.fixture(scope="session")
def tiny_macro():
    """Narrow skeleton so full searches stay fast in tests."""
    return MacroConfig(stem_channels=4, num_classes=4)


@pytest.fixture(scope="session")
def tiny_lif():
    # two steps cap the potential at 0.75x, so a sub-1.0 threshold keeps
    # firing codes informative at test scale
    return LIFParams(v_threshold=0.2, timesteps=2)


@pytest.fixture(scope="session")
def small_dataset():
    return synth_dataset(64, 4, seed=11)
