import numpy as np
import pytest
from dataclasses import replace

from pilotveil import (
    AmScheme,
    AnScheme,
    FITTED_GAIN_CALIBRATION,
    SweepSpec,
    default_scenario,
    run_sweep,
)


@pytest.fixture(scope="session")
def base_scenario():
    """Default scene with the fitted gain calibration applied."""
    return default_scenario(gain_calibration=FITTED_GAIN_CALIBRATION)


@pytest.fixture(scope="session")
def am10_scenario(base_scenario):
    W = base_scenario.config.bandwidth
    return replace(base_scenario, scheme=AmScheme(gains=(10.0,), delays=(1.0 / W,)))


@pytest.fixture(scope="session")
def am30_scenario(base_scenario):
    W = base_scenario.config.bandwidth
    return replace(base_scenario, scheme=AmScheme(gains=(1000.0,), delays=(1.0 / W,)))


@pytest.fixture(scope="session")
def an_scenario(base_scenario):
    return replace(base_scenario, scheme=AnScheme(strength=1000.0, seed=1))


@pytest.fixture(scope="session")
def all_preset_rows(base_scenario):
    """One full sweep per figure preset (shared; the expensive fixture)."""
    rows = {}
    for preset in ("fig2", "fig3", "fig4", "fig5a", "fig5b"):
        rows[preset] = run_sweep(SweepSpec(preset=preset, base_scenario=base_scenario, an_seed=1))
    return rows


def rel_err(value, target):
    return abs(value - target) / abs(target)
