"""Shared fixtures: desk-scale parameter sets (all rates 1/100 of the
full-rate design so unit tests stay fast while exercising identical
sample-level behavior)."""

import pytest

from cvqkdsim import pipeline
from cvqkdsim.dsp import DemodPlan
from cvqkdsim.rxsim import DetectorParams
from cvqkdsim.txsim import TxParams, pilot_amplitude_for

SCALE = 100.0


@pytest.fixture
def fast_tx() -> TxParams:
    return TxParams(symbol_rate=1e9 / SCALE, dac_rate=30e9 / SCALE,
                    signal_shift=1.3e9 / SCALE,
                    pilot_amplitude=pilot_amplitude_for(3.9))


@pytest.fixture
def fast_detector() -> DetectorParams:
    return DetectorParams(detector_bw=1.6e9 / SCALE, adc_rate=10e9 / SCALE,
                          lo_offset=2e9 / SCALE, snu_ref_rate=1e9 / SCALE)


@pytest.fixture
def fast_plan(fast_detector) -> DemodPlan:
    return DemodPlan(symbol_rate=1e9 / SCALE, quantum_center=0.7e9 / SCALE,
                     quantum_bw=1.3e9 / SCALE, pilot_center=2e9 / SCALE,
                     pilot_bw=10e6 / SCALE, fo_search=100e6 / SCALE,
                     compensate_bw=fast_detector.detector_bw)


@pytest.fixture
def fast_cfg():
    """Full-impairment 50 km fast-profile config, small block."""
    return pipeline.default_config(distance_km=50.0, xi=0.04,
                                   n_symbols=30_000, fast=True)
