"""Bob's receiver: heterodyne beat, detector bandwidth, noise, ADC.

Each polarization branch beats with a local oscillator detuned by
``lo_offset`` from Alice's carrier, producing one real IF record per
branch:

    r(t) = Re{ sqrt(eta) * env(t) * exp(-i 2 pi lo_offset t) } + n(t)

Shot noise is white with two-sided PSD 1/(2 snu_ref_rate): digital
down-conversion and matched filtering of the real record then leave
exactly one shot-noise unit of variance per quadrature at the reference
symbol rate, so the symbol-level measurement is the heterodyne model
x_B = sqrt(eta T / 2) x_A + n with Var(n) = 1 + v_el in vacuum.
Electronic noise has PSD v_el/(2 snu_ref_rate) on the same scale.  Both
noises and the signal pass the same single-pole detector response, so
calibrating on vacuum records removes the detector shape exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import butter, lfilter, resample_poly

from .core import DualPolWaveform, ParameterError, SeedPolicy, Waveform

_CHUNK = 1 << 22
_MAGIC = b"CVQKDIF1"


@dataclass(frozen=True)
class DetectorParams:
    eta: float = 0.56
    v_el: float = 0.16
    detector_bw: float | None = 1.6e9
    adc_rate: float = 10e9
    lo_offset: float = 2e9
    snu_ref_rate: float = 1e9   # symbol rate defining the shot-noise unit

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ParameterError("eta must be in (0, 1]")
        if self.v_el < 0:
            raise ParameterError("v_el must be >= 0")
        if self.adc_rate <= 0 or self.snu_ref_rate <= 0:
            raise ParameterError("rates must be > 0")
        if self.detector_bw is not None and self.detector_bw <= 0:
            raise ParameterError("detector_bw must be > 0")


def _real_beat(env: np.ndarray, eta: float, lo_over_fs: float) -> np.ndarray:
    """Re{ sqrt(eta) env exp(-i 2 pi lo_over_fs n) }, chunked."""
    out = np.empty(env.size, dtype=np.float32)
    amp = np.float32(np.sqrt(eta))
    for start in range(0, env.size, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, env.size), dtype=np.float64)
        rot = np.exp(-2j * np.pi * lo_over_fs * idx).astype(np.complex64)
        out[start:start + idx.size] = (amp * env[start:start + idx.size] * rot).real
    return out


def _detect_branch(env: np.ndarray, fs: float, d: DetectorParams,
                   rng_shot, rng_elec) -> np.ndarray:
    r = _real_beat(env, d.eta, d.lo_offset / fs)
    if rng_shot is not None:
        sigma = np.float32(np.sqrt(fs / (2.0 * d.snu_ref_rate)))
        for start in range(0, r.size, _CHUNK):
            m = min(_CHUNK, r.size - start)
            r[start:start + m] += sigma * rng_shot.standard_normal(m, dtype=np.float32)
    if rng_elec is not None and d.v_el > 0:
        sigma = np.float32(np.sqrt(d.v_el * fs / (2.0 * d.snu_ref_rate)))
        for start in range(0, r.size, _CHUNK):
            m = min(_CHUNK, r.size - start)
            r[start:start + m] += sigma * rng_elec.standard_normal(m, dtype=np.float32)
    if d.detector_bw is not None:
        b, a = butter(1, d.detector_bw, fs=fs)
        r = lfilter(b, a, r).astype(np.float32)
    frac = Fraction(d.adc_rate / fs).limit_denominator(1000)
    if frac != 1:
        r = resample_poly(r, frac.numerator, frac.denominator).astype(np.float32)
    return r


def _check_aliasing(fs_in: float, d: DetectorParams, signal_band_edge: float):
    if signal_band_edge >= d.adc_rate / 2:
        raise ParameterError(
            f"signal band edge {signal_band_edge:.3g} Hz aliases at "
            f"ADC rate {d.adc_rate:.3g} Hz")


def heterodyne_detect(wave: DualPolWaveform, d: DetectorParams,
                      seeds: SeedPolicy, add_shot: bool = True,
                      add_elec: bool = True):
    """Detect both polarization branches; returns (h_if, v_if) real records.

    ``add_shot`` / ``add_elec`` toggle the noise sources (the seeds of
    the remaining sources are unaffected), used for paired calibration
    and reference runs.
    """
    fs = wave.sample_rate
    _check_aliasing(fs, d, d.lo_offset)
    rng_shot = seeds.rng("rx_shot") if add_shot else None
    rng_elec = seeds.rng("rx_elec") if add_elec else None
    h_if = _detect_branch(wave.h.samples, fs, d, rng_shot, rng_elec)
    v_if = _detect_branch(wave.v.samples, fs, d, rng_shot, rng_elec)
    return Waveform(h_if, d.adc_rate), Waveform(v_if, d.adc_rate)


def vacuum_record(n: int, d: DetectorParams, seeds: SeedPolicy,
                  sim_rate: float | None = None) -> Waveform:
    """Shot + electronic noise record (LO on, no optical signal)."""
    return _noise_record(n, d, seeds, add_shot=True, sim_rate=sim_rate)


def electronic_record(n: int, d: DetectorParams, seeds: SeedPolicy,
                      sim_rate: float | None = None) -> Waveform:
    """Electronic-noise-only record (LO off)."""
    return _noise_record(n, d, seeds, add_shot=False, sim_rate=sim_rate)


def _noise_record(n: int, d: DetectorParams, seeds: SeedPolicy,
                  add_shot: bool, sim_rate: float | None) -> Waveform:
    if n < 1:
        raise ParameterError("n must be >= 1")
    fs = sim_rate or d.adc_rate
    n_in = int(np.ceil(n * fs / d.adc_rate)) + 64
    env = np.zeros(n_in, dtype=np.complex64)
    rng_shot = seeds.rng("rx_shot") if add_shot else None
    r = _detect_branch(env, fs, d, rng_shot, seeds.rng("rx_elec"))
    return Waveform(r[:n], d.adc_rate)


def save_if_records(path, records, sample_rate: float) -> None:
    """Write IF records to the flat binary format.

    32-byte little-endian header: magic "CVQKDIF1", sample rate
    (float64), channel count (uint32), per-channel length (uint64),
    4 pad bytes; then float32 samples, channel-interleaved.
    """
    arrs = [np.asarray(r.samples if isinstance(r, Waveform) else r,
                       dtype=np.float32) for r in records]
    length = arrs[0].size
    if any(a.size != length for a in arrs):
        raise ParameterError("all channels must have equal length")
    header = struct.pack("<8sdIQ4x", _MAGIC, float(sample_rate), len(arrs), length)
    inter = np.stack(arrs, axis=1).reshape(-1)
    with open(path, "wb") as f:
        f.write(header)
        inter.tofile(f)


def load_if_records(path):
    """Read IF records written by :func:`save_if_records`.

    Returns (list of Waveform, sample_rate).
    """
    with open(path, "rb") as f:
        header = f.read(32)
        if len(header) != 32:
            raise ParameterError("truncated IF record header")
        magic, fs, nchan, length = struct.unpack("<8sdIQ4x", header)
        if magic != _MAGIC:
            raise ParameterError(f"bad magic {magic!r} in IF record file")
        data = np.fromfile(f, dtype=np.float32, count=nchan * length)
    if data.size != nchan * length:
        raise ParameterError("truncated IF record payload")
    chans = data.reshape(length, nchan)
    return [Waveform(np.ascontiguousarray(chans[:, i]), fs)
            for i in range(nchan)], fs
