"""Digital demodulation, pilot phase compensation and symbol sync.

The real IF record holds the conjugate envelope bands at +700 MHz
(quantum) and +2 GHz (pilot beat); multiplying by exp(+i 2 pi f t)
extracts the negative-frequency band carrying the true (unconjugated)
envelope.  The quantum low-pass is the root-raised-cosine matched
filter, whose two-sided bandwidth equals the band-pass plan bandwidth.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import butter, firwin, freqz, kaiserord, oaconvolve, resample_poly

from ..core import ParameterError, Waveform
from ..txsim import rrc_taps

_CHUNK = 1 << 22


class SyncError(RuntimeError):
    """Training-sequence correlation peak missing or ambiguous."""


@dataclass(frozen=True)
class DemodPlan:
    symbol_rate: float = 1e9
    quantum_center: float = 0.7e9     # nominal quantum IF, Hz
    quantum_bw: float = 1.3e9         # two-sided band-pass width, Hz
    pilot_center: float = 2e9         # nominal pilot beat, Hz
    pilot_bw: float = 10e6            # two-sided band-pass width, Hz
    roll_off: float = 0.3
    pulse_span: int = 20
    fo_search: float = 100e6          # FO search window around pilot_center
    compensate_bw: float | None = None  # trusted detector bandwidth, Hz

    def __post_init__(self):
        if self.symbol_rate <= 0:
            raise ParameterError("symbol_rate must be > 0")
        q_hi = self.quantum_center + self.quantum_bw / 2
        p_lo = self.pilot_center - self.pilot_bw / 2
        if q_hi >= p_lo:
            raise ParameterError("quantum and pilot bands overlap")

    def sps(self, sample_rate: float) -> int:
        r = sample_rate / self.symbol_rate
        if abs(r - round(r)) > 1e-9:
            raise ParameterError("sample rate must be an integer number of "
                                 "samples per symbol")
        return int(round(r))

    def validate_rate(self, sample_rate: float):
        nyq = sample_rate / 2
        if self.pilot_center + self.pilot_bw / 2 >= nyq:
            raise ParameterError("pilot band exceeds Nyquist")
        if self.quantum_center + self.quantum_bw / 2 >= nyq:
            raise ParameterError("quantum band exceeds Nyquist")


def _mix_down(x: np.ndarray, f_over_fs: float) -> np.ndarray:
    """2 * x * exp(+i 2 pi f_over_fs n): extracts the band at -f."""
    out = np.empty(x.size, dtype=np.complex64)
    for start in range(0, x.size, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, x.size), dtype=np.float64)
        rot = np.exp(2j * np.pi * f_over_fs * idx).astype(np.complex64)
        out[start:start + idx.size] = 2.0 * x[start:start + idx.size] * rot
    return out


def matched_filter_taps(plan: DemodPlan, sample_rate: float) -> np.ndarray:
    """RRC matched filter at the record rate, normalized so the cascade
    with the transmit pulse has unit symbol gain ((1/Ts) integral s p)."""
    sps = plan.sps(sample_rate)
    return rrc_taps(sps, plan.roll_off, plan.pulse_span) / np.sqrt(sps)


def _composite_quantum_taps(plan: DemodPlan, fs: float,
                            f_center: float) -> np.ndarray:
    """Matched filter with the trusted detector response divided out.

    The receiver's single-pole bandwidth is a calibrated constant of the
    trusted detector, so its amplitude droop and phase rotation across
    the quantum band can be compensated deterministically instead of
    burdening the low-SNR adaptive equalizer.  The envelope extracted at
    baseband offset ``f_bb`` passed the detector at the record frequency
    ``f_center - f_bb`` (negative-frequency band of the real record), so
    the effective response to divide out is conj(D(f_center - f_bb)).
    """
    h = matched_filter_taps(plan, fs)
    if plan.compensate_bw is None:
        return h
    n = h.size
    n_fft = 1 << int(np.ceil(np.log2(8 * n)))
    center = (n - 1) // 2
    padded = np.zeros(n_fft)
    padded[:n] = h
    spec = np.fft.fft(np.roll(padded, -center))
    f_bb = np.fft.fftfreq(n_fft, 1.0 / fs)
    b, a = butter(1, plan.compensate_bw, fs=fs)
    f_det = f_center - f_bb
    _, d = freqz(b, a, worN=2 * np.pi * np.abs(f_det) / fs)
    d = np.where(f_det < 0, d, np.conj(d))  # D(-f) = conj(D(f)), then conj
    comp = np.fft.ifft(spec / d)
    return np.roll(comp, center)[:n].astype(np.complex64)


def demodulate(if_record: Waveform, plan: DemodPlan, fo_hat: float | None = None):
    """Down-convert and filter the quantum band and the pilot band.

    Returns ``(quantum_bb, pilot_bb)``: the quantum complex baseband at
    the record rate (matched-filtered, integer samples/symbol) and the
    pilot complex baseband decimated to a rate a few times its
    bandwidth.
    """
    fs = if_record.sample_rate
    plan.validate_rate(fs)
    if fo_hat is None:
        fo_hat = plan.pilot_center
    if abs(fo_hat - plan.pilot_center) > plan.fo_search / 2:
        raise ParameterError("fo_hat outside the search window")
    delta = fo_hat - plan.pilot_center
    x = np.asarray(if_record.samples, dtype=np.float32)

    # quantum band: mix down, matched-filter (centered, no group delay),
    # dividing out the trusted detector response when configured
    zq = _mix_down(x, (plan.quantum_center + delta) / fs)
    h = _composite_quantum_taps(plan, fs, plan.quantum_center + delta)
    if h.dtype.kind != "c":
        h = h.astype(np.float32)
    zq = oaconvolve(zq, h, mode="same").astype(np.complex64)
    quantum_bb = Waveform(zq, fs)

    # pilot band: mix down, decimate, low-pass
    zp = _mix_down(x, fo_hat / fs)
    decim = max(1, int(fs / (8 * plan.pilot_bw)))
    if decim > 1:
        zp = resample_poly(zp, 1, decim)
    fs_p = fs / decim
    ntaps, beta = kaiserord(60.0, (plan.pilot_bw / 2) / (fs_p / 2))
    ntaps |= 1
    lp = firwin(ntaps, plan.pilot_bw / 2, window=("kaiser", beta), fs=fs_p)
    zp = oaconvolve(zp, lp.astype(np.float32), mode="same").astype(np.complex64)
    pilot_bb = Waveform(zp, fs_p)
    return quantum_bb, pilot_bb


def pilot_phase(pilot_bb: Waveform, min_pilot_power: float = 1e-12) -> np.ndarray:
    """Unwrapped pilot phase at the (decimated) pilot rate."""
    zp = pilot_bb.samples
    if float(np.mean(np.abs(zp) ** 2)) <= min_pilot_power:
        raise SyncError("pilot power below compensation threshold")
    return np.unwrap(np.angle(zp).astype(np.float64))


def apply_phase(quantum_bb: Waveform, phase: np.ndarray, pilot_rate: float,
                lag: float = 0.0) -> Waveform:
    """Rotate the quantum baseband by exp(-i phase(t - lag)).

    ``phase`` is sampled at ``pilot_rate`` and linearly interpolated onto
    the quantum timebase; ``lag`` is in quantum samples.  Splitting the
    extraction (:func:`pilot_phase`) from the application lets a phase
    trajectory measured on one record be replayed on paired records.
    """
    tq = (np.arange(len(quantum_bb)) - lag) / quantum_bb.sample_rate
    tp = np.arange(phase.size) / pilot_rate
    ph_q = np.interp(tq, tp, phase)
    out = quantum_bb.samples * np.exp(-1j * ph_q).astype(np.complex64)
    return Waveform(out.astype(np.complex64), quantum_bb.sample_rate)


def pilot_phase_compensate(quantum_bb: Waveform, pilot_bb: Waveform,
                           lag: float = 0.0,
                           min_pilot_power: float = 1e-12) -> Waveform:
    """Rotate the quantum baseband by the negated pilot phase.

    The pilot phase is unwrapped at the (decimated) pilot rate and
    linearly interpolated onto the quantum timebase; ``lag`` shifts the
    pilot phase by that many quantum samples before application.
    """
    ph = pilot_phase(pilot_bb, min_pilot_power)
    return apply_phase(quantum_bb, ph, pilot_bb.sample_rate, lag)


def symbol_sync(quantum_bb: Waveform, training: np.ndarray, sps: int,
                search: slice | None = None, min_peak_ratio: float = 5.0):
    """Find the training prefix by cross-correlation at full rate.

    Returns ``(offset, phase)``: the record index of the first training
    symbol and the residual constant phase at the peak.  The peak must
    exceed ``min_peak_ratio`` times the RMS sidelobe level.
    """
    y = quantum_bb.samples
    tr = np.asarray(training, dtype=np.complex64)
    if tr.size == 0:
        raise SyncError("no training sequence available")
    # convolution with the reversed conjugate template gives the
    # correlation c[m] = sum_k conj(tr[k]) y[m + k*sps] in 'valid' mode
    template = np.zeros((tr.size - 1) * sps + 1, dtype=np.complex64)
    template[::sps] = np.conj(tr[::-1])
    c = oaconvolve(y, template, mode="valid")
    mag = np.abs(c)
    if search is not None:
        masked = np.full_like(mag, -1.0)
        masked[search] = mag[search]
        peak_idx = int(np.argmax(masked))
    else:
        peak_idx = int(np.argmax(mag))
    peak = mag[peak_idx]
    side = np.concatenate([mag[:max(0, peak_idx - 2 * sps)],
                           mag[peak_idx + 2 * sps:]])
    if search is not None:
        sel = np.zeros(mag.size, dtype=bool)
        sel[search] = True
        sel[max(0, peak_idx - 2 * sps):peak_idx + 2 * sps] = False
        side = mag[sel]
    rms = float(np.sqrt(np.mean(side ** 2))) if side.size else 0.0
    if rms <= 0 or peak < min_peak_ratio * rms:
        raise SyncError(
            f"ambiguous sync peak: {peak:.3g} vs {min_peak_ratio} x RMS "
            f"sidelobe {rms:.3g}")
    # earliest maximal peak; 'valid' indexing makes the peak index the
    # record position of the first training symbol
    offset = peak_idx
    phase = float(np.angle(c[peak_idx]))
    return offset, phase
