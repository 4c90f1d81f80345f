"""Alice's side: pulse shaping, digital frequency shift, pilot tone, mux.

The complex envelopes produced here are referenced to Alice's optical
carrier.  The transmitted symbol stream is

    s(t) = sum_k a_k p(t - k/R_s) * exp(i 2 pi f_shift t)

with p a root-raised-cosine (or rectangular) pulse normalized so that
the pulse energy equals one symbol period (a rectangular pulse has unit
amplitude).  The matched filter (1/Ts) integral s p then recovers the
symbols with unit gain, and the mean signal power equals the modulation
variance.  The pilot is a CW tone at the carrier line on the orthogonal
polarization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import upfirdn

from .core import DualPolWaveform, ParameterError, SymbolFrame, Waveform

_CHUNK = 1 << 22


@dataclass(frozen=True)
class TxParams:
    symbol_rate: float = 1e9
    dac_rate: float = 30e9
    signal_shift: float = 1.3e9
    pulse_kind: str = "rrc"          # "rrc" | "rect"
    roll_off: float = 0.3
    pulse_span: int = 20             # RRC filter length in symbols
    pilot_amplitude: float = 0.0     # linear field units (unit-SNU scale)
    pilot_offset: float = 0.0        # Hz from the carrier line

    def __post_init__(self):
        if self.symbol_rate <= 0 or self.dac_rate <= 0:
            raise ParameterError("rates must be > 0")
        if self.dac_rate < 2 * (self.signal_shift + self.symbol_rate):
            raise ParameterError(
                "dac_rate violates Nyquist for the shifted signal band")
        if self.pulse_kind not in ("rrc", "rect"):
            raise ParameterError("pulse_kind must be 'rrc' or 'rect'")
        if not 0 <= self.roll_off <= 1:
            raise ParameterError("roll_off must be in [0, 1]")
        if self.pilot_amplitude < 0:
            raise ParameterError("pilot_amplitude must be >= 0")
        mod = self.dac_rate / self.symbol_rate
        if abs(mod - round(mod)) > 1e-9:
            raise ParameterError("dac_rate must be an integer multiple of symbol_rate")

    @property
    def sps(self) -> int:
        return int(round(self.dac_rate / self.symbol_rate))


def rrc_taps(sps: int, roll_off: float, span: int) -> np.ndarray:
    """Root-raised-cosine taps at ``sps`` samples/symbol, unit discrete energy."""
    n = span * sps
    t = (np.arange(-n // 2, n // 2 + 1)) / sps  # in symbol periods
    beta = roll_off
    h = np.empty_like(t)
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            h[i] = 1.0 - beta + 4 * beta / np.pi
        elif beta > 0 and abs(abs(4 * beta * ti) - 1.0) < 1e-9:
            h[i] = (beta / np.sqrt(2)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
                + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta)))
        else:
            num = (np.sin(np.pi * ti * (1 - beta))
                   + 4 * beta * ti * np.cos(np.pi * ti * (1 + beta)))
            den = np.pi * ti * (1 - (4 * beta * ti) ** 2)
            h[i] = num / den
    return h / np.sqrt(np.sum(h ** 2))


def pulse_taps(p: TxParams) -> np.ndarray:
    """Discrete pulse p(k / dac_rate) with energy of one symbol period.

    sum h^2 = sps, so integral p^2 dt = 1 / symbol_rate; a rectangular
    pulse comes out with unit amplitude.
    """
    if p.pulse_kind == "rrc":
        h = rrc_taps(p.sps, p.roll_off, p.pulse_span)
    else:
        h = np.ones(p.sps) / np.sqrt(p.sps)
    return h * np.sqrt(p.sps)


def apply_freq_shift(samples: np.ndarray, f_over_fs: float,
                     phase0: float = 0.0) -> np.ndarray:
    """Multiply by exp(i (2 pi f_over_fs n + phase0)) in place, chunked.

    Phases are accumulated in float64 to stay accurate over long records.
    """
    for start in range(0, samples.size, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, samples.size), dtype=np.float64)
        ph = 2 * np.pi * f_over_fs * idx + phase0
        samples[start:start + _CHUNK] *= np.exp(1j * ph).astype(samples.dtype)
    return samples


def shape_and_shift(frame: SymbolFrame, p: TxParams) -> Waveform:
    """Pulse-shape the symbols and shift them to the signal band."""
    a = frame.symbols.astype(np.complex64)
    h = pulse_taps(p).astype(np.float32)
    s = upfirdn(h, a, up=p.sps)
    # drop the filter ramp so sample n corresponds to symbol n/sps with
    # the pulse peak at the group-delay origin
    delay = (len(h) - 1) // 2
    s = s[delay:delay + frame.symbols.size * p.sps]
    if p.signal_shift:
        apply_freq_shift(s, p.signal_shift / p.dac_rate)
    return Waveform(s, p.dac_rate)


def make_pilot(n_samples: int, p: TxParams) -> Waveform:
    """Constant-amplitude complex exponential at the pilot offset."""
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    if p.pilot_amplitude == 0:
        return Waveform(np.zeros(n_samples, dtype=np.complex64), p.dac_rate)
    s = np.full(n_samples, np.complex64(p.pilot_amplitude))
    if p.pilot_offset:
        apply_freq_shift(s, p.pilot_offset / p.dac_rate)
    return Waveform(s, p.dac_rate)


def mux_polarization(signal: Waveform, pilot: Waveform) -> DualPolWaveform:
    """Combine quantum signal (h) and pilot (v) into one dual-pol field."""
    if len(signal) != len(pilot) or signal.sample_rate != pilot.sample_rate:
        raise ParameterError("signal and pilot must match in length and rate")
    return DualPolWaveform(h=signal, v=pilot)


def pilot_amplitude_for(v_mod: float, ratio_db: float = 20.0) -> float:
    """Pilot field amplitude placing its power ``ratio_db`` above the
    mean quantum-signal power (which equals v_mod in these units)."""
    return float(np.sqrt(10 ** (ratio_db / 10) * v_mod))
