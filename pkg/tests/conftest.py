"""
Shared fixtures for filecache tests
"""
import sys
from pathlib import Path

import pytest

# Add src to path for testing
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))
sys.path.insert(0, str(Path(__file__).parent))

from core.network import CacheNetworkConfig, RngSpec


@pytest.fixture
def small_cfg():
    return CacheNetworkConfig(K=20, N=100, M=20)


@pytest.fixture
def rng():
    return RngSpec(master_seed=12345, stream_id=0)

