from __future__ import annotations

import pytest

from mmharvest.model import AntennaPattern, SystemParams, gain_distribution


@pytest.fixture
def params():
    """Baseline network: 100 BS/km2, 13 dBm, 28 GHz free-space intercepts."""
    return SystemParams()


@pytest.fixture
def sector_tx():
    return AntennaPattern.from_db(10, -10, 30, 330)


@pytest.fixture
def gains(sector_tx):
    return gain_distribution(sector_tx, AntennaPattern.omni())
