"""Fiber channel impairments for the dual-polarization field.

Model, applied in this order to the input envelopes (referenced to
Alice's carrier):

1. attenuation sqrt(T), T = 10^(-atten * length / 10)
2. laser phase noise: Wiener process, per-sample increment variance
   2 pi * combined_linewidth / sample_rate
3. carrier detuning: the deviation of the actual laser difference from
   the receiver's nominal LO offset, plus an optional linear drift
   (the nominal 2 GHz beat itself is realized in the receiver model)
4. polarization rotation: SU(2) random walk, block-wise
5. additive noise on the quantum polarization: channel-input-referred
   excess noise xi in shot-noise units, band-limited to the signal band
   so a matched filter sees exactly the eta*T*xi/2 per-quadrature excess
   of the heterodyne measurement model, plus an optional crosstalk
   pedestal around the pilot line

Multiplicative state (phase, rotation, detuning) is drawn from its own
seed streams, so paired runs can toggle the additive noise sources while
keeping the same channel realization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .core import DualPolWaveform, ParameterError, SeedPolicy, Waveform

_CHUNK = 1 << 22


@dataclass(frozen=True)
class ChannelParams:
    length_km: float = 50.0
    atten_db_km: float = 0.2
    combined_linewidth: float = 2e3      # Hz, both lasers combined
    freq_offset: float = 2e9             # actual laser difference, Hz
    nominal_offset: float = 2e9          # receiver's nominal LO offset, Hz
    freq_drift: float = 0.0              # Hz/s
    pol_drift_rate: float = 0.0          # rad/s random-walk scale
    pol_block: int = 16384               # samples per Jones step
    xi_inject: float = 0.0               # SNU, channel-input referred
    xi_band_center: float = 1.3e9        # Hz, center of the signal band
    xi_bandwidth: float = 1.43e9         # Hz, must cover the pulse spectrum
    xi_ref_rate: float = 1e9             # Hz, symbol rate defining the SNU
    crosstalk_db: float | None = None    # dB rel. quantum power at output
    crosstalk_bw: float = 100e6          # Hz, pedestal width around pilot line

    def __post_init__(self):
        if self.length_km < 0 or self.atten_db_km < 0:
            raise ParameterError("length and attenuation must be >= 0")
        if self.combined_linewidth < 0:
            raise ParameterError("linewidth must be >= 0")
        if self.xi_inject < 0:
            raise ParameterError("xi_inject must be >= 0")
        if self.pol_block < 1:
            raise ParameterError("pol_block must be >= 1")

    @property
    def transmittance_value(self) -> float:
        return transmittance(self.length_km, self.atten_db_km)


def transmittance(length_km: float, atten_db_km: float) -> float:
    """Fiber power transmittance 10^(-atten * length / 10)."""
    if length_km < 0:
        raise ParameterError("length must be >= 0")
    return float(10.0 ** (-atten_db_km * length_km / 10.0))


def wiener_phase_apply(h: np.ndarray, v: np.ndarray, linewidth: float,
                       sample_rate: float, rng: np.random.Generator) -> None:
    """Multiply both branches in place by exp(i phi), phi a Wiener process."""
    if linewidth == 0:
        return
    step = np.sqrt(2 * np.pi * linewidth / sample_rate)
    carry = 0.0
    n = h.size
    for start in range(0, n, _CHUNK):
        m = min(_CHUNK, n - start)
        incr = rng.standard_normal(m) * step
        phi = carry + np.cumsum(incr)
        carry = phi[-1]
        rot = np.exp(1j * phi).astype(h.dtype)
        h[start:start + m] *= rot
        v[start:start + m] *= rot


def detuning_apply(h: np.ndarray, v: np.ndarray, delta_f: float, drift: float,
                   sample_rate: float) -> None:
    """Multiply in place by exp(-i 2 pi (delta_f t + drift t^2 / 2))."""
    if delta_f == 0 and drift == 0:
        return
    n = h.size
    for start in range(0, n, _CHUNK):
        t = np.arange(start, min(start + _CHUNK, n), dtype=np.float64) / sample_rate
        ph = -2 * np.pi * (delta_f * t + 0.5 * drift * t * t)
        rot = np.exp(1j * ph).astype(h.dtype)
        h[start:start + t.size] *= rot
        v[start:start + t.size] *= rot


def jones_trajectory(n_blocks: int, angle_std: float,
                     rng: np.random.Generator) -> np.ndarray:
    """SU(2) random walk: per-block small rotations about random axes.

    Returns an (n_blocks, 2, 2) array of cumulative unitaries.
    """
    out = np.empty((n_blocks, 2, 2), dtype=np.complex128)
    j = np.eye(2, dtype=np.complex128)
    for k in range(n_blocks):
        if angle_std > 0:
            theta = rng.normal(0.0, angle_std)
            ax = rng.standard_normal(3)
            ax /= np.linalg.norm(ax)
            c, s = np.cos(theta / 2), -1j * np.sin(theta / 2)
            r = np.array([
                [c + s * ax[2], s * (ax[0] - 1j * ax[1])],
                [s * (ax[0] + 1j * ax[1]), c - s * ax[2]],
            ])
            j = r @ j
        out[k] = j
    return out


def _band_noise(n: int, per_quad_var: float, f_center: float, bandwidth: float,
                sample_rate: float, rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian noise, white inside the band, zero outside.

    ``per_quad_var`` is the per-quadrature per-sample variance of the
    underlying full-band white process; masking preserves its in-band
    PSD (per_quad_var / sample_rate per quadrature).
    """
    w = (rng.standard_normal(n, dtype=np.float32)
         + 1j * rng.standard_normal(n, dtype=np.float32))
    w *= np.float32(np.sqrt(per_quad_var))
    spec = sfft.fft(w, overwrite_x=True, workers=1)
    freqs = np.fft.fftfreq(n, d=1.0 / sample_rate)
    mask = np.abs(freqs - f_center) > bandwidth / 2
    spec[mask] = 0
    return sfft.ifft(spec, overwrite_x=True, workers=1).astype(np.complex64)


def apply_channel(wave: DualPolWaveform, p: ChannelParams, seeds: SeedPolicy,
                  inject_noise: bool = True) -> DualPolWaveform:
    """Run the dual-polarization field through the fiber model.

    ``inject_noise=False`` keeps the multiplicative channel state
    (attenuation, phase, detuning, rotation) but skips the additive
    noise; with identical seeds this yields the exact noise-free part of
    the noisy run, which the pipeline uses for paired reference runs.
    """
    fs = wave.sample_rate
    n = len(wave)
    t_lin = p.transmittance_value
    amp = np.sqrt(t_lin, dtype=np.float64)

    h = wave.h.samples.astype(np.complex64) * np.complex64(amp)
    v = wave.v.samples.astype(np.complex64) * np.complex64(amp)

    wiener_phase_apply(h, v, p.combined_linewidth, fs, seeds.rng("channel_phase"))
    detuning_apply(h, v, p.freq_offset - p.nominal_offset, p.freq_drift, fs)

    if p.pol_drift_rate > 0:
        n_blocks = int(np.ceil(n / p.pol_block))
        angle_std = p.pol_drift_rate * (p.pol_block / fs)
        traj = jones_trajectory(n_blocks, angle_std, seeds.rng("channel_jones"))
        for k in range(n_blocks):
            sl = slice(k * p.pol_block, min((k + 1) * p.pol_block, n))
            j = traj[k].astype(np.complex64)
            hk = h[sl].copy()
            h[sl] = j[0, 0] * hk + j[0, 1] * v[sl]
            v[sl] = j[1, 0] * hk + j[1, 1] * v[sl]

    if inject_noise:
        if p.xi_inject > 0:
            # per-quad PSD = T*xi / (2*symbol_rate): after detection and
            # matched filtering this contributes eta*T*xi/2 per
            # quadrature, the excess term of the heterodyne measurement
            # model x_B = sqrt(eta T / 2) x_A + n
            per_quad_var = t_lin * p.xi_inject * fs / (2.0 * p.xi_ref_rate)
            h += _band_noise(n, per_quad_var, p.xi_band_center, p.xi_bandwidth,
                             fs, seeds.rng("channel_xi"))
        if p.crosstalk_db is not None:
            # pedestal power relative to the attenuated quantum signal;
            # quantum mean power equals v_mod * T, inferred from the wave
            p_q = t_lin * wave.h.power()
            p_x = p_q * 10.0 ** (p.crosstalk_db / 10.0)
            per_quad_var = 0.5 * p_x * fs / p.crosstalk_bw
            h += _band_noise(n, per_quad_var, 0.0, p.crosstalk_bw, fs,
                             seeds.rng("channel_crosstalk"))

    return DualPolWaveform(Waveform(h, fs), Waveform(v, fs))


def xi_band_for(symbol_rate: float, roll_off: float, signal_shift: float):
    """(center, bandwidth) of an excess-noise injection band that covers
    the whole pulse spectrum with a 10% margin."""
    return signal_shift, 1.1 * (1.0 + roll_off) * symbol_rate
