"""Receiver DSP: frequency-offset estimation, demodulation with
pilot-based phase compensation, and data-aided MIMO equalization."""

from .demod import (DemodPlan, demodulate, pilot_phase, apply_phase,
                    pilot_phase_compensate, symbol_sync, SyncError)
from .freq import estimate_fo, EstimationError
from .equalizer import (EqualizerWeights, lms_train, equalize,
                        streams_from_symbols, TrainingDivergence, lms_backend)

__all__ = [
    "DemodPlan", "demodulate", "pilot_phase", "apply_phase",
    "pilot_phase_compensate", "symbol_sync", "SyncError", "estimate_fo",
    "EstimationError", "EqualizerWeights", "lms_train", "equalize",
    "streams_from_symbols", "TrainingDivergence", "lms_backend",
]
