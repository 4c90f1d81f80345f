"""End-to-end simulation pipeline: tx -> channel -> rx -> dsp -> estimation.

Two estimation paths are provided:

* :func:`simulate_once` runs the chain once and estimates (T, xi) from
  the recovered symbol pairs alone, exactly as an experiment would.
  The per-block statistical error of xi_hat is then set by the shot
  noise: sigma(xi_hat) ~ 2 * (1 + v_el) * sqrt(2/(2N)) / (eta * T),
  which at long distance dwarfs the few-milli-SNU effects of interest.

* :func:`estimate_linked` additionally runs two auxiliary simulations
  that share every random stream with the data run: a *reference* run
  (pilot and detection noise, no quantum signal, no channel noise) and a
  *probe* run (quantum signal only, lossless, noise-free).  The whole
  receiver+DSP state measured on the data run (frequency offset, pilot
  phase trajectory, symbol timing, equalizer taps) is frozen into one
  linear operator applied identically to all records.  By linearity,

      y_data - y_ref = sqrt(T) * y_probe + L(channel noise)

  exactly, so the transmittance and the excess-noise variance can be
  read off with common random numbers cancelling the shot/electronic
  noise instead of competing with it.  This is a simulator-only
  instrument (it requires replaying noise realizations) and is what the
  noise time series uses for per-block estimates.

Every frequency in the simulation enters the algorithms only as a ratio
to a sample rate, so scaling all rates by a common factor (the ``fast``
profile, 1/100) reproduces the same records sample-for-sample while
keeping desk-scale runtimes honest.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import channel as channel_mod
from . import rxsim, txsim
from .core import (DualPolWaveform, ParameterError, SeedPolicy, SymbolFrame,
                   Waveform, derive_seeds, gaussian_symbols)
from .dsp import (DemodPlan, EqualizerWeights, SyncError, apply_phase,
                  demodulate, equalize, estimate_fo, lms_train, pilot_phase,
                  streams_from_symbols, symbol_sync)
from .estimation import NoiseEstimate, estimate_channel
from .security import KeyRateReport, SecurityParams, skr


@dataclass(frozen=True)
class SimConfig:
    """One block's worth of simulation parameters."""

    n_symbols: int = 100_000
    v_mod: float = 3.9
    n_training: int = 2000
    guard: int = 1000                 # symbols dropped at each block edge
    n_taps: int = 21
    mu: float = 0.01                  # NLMS step for the pipeline
    eta: float = 0.56
    v_el: float = 0.16
    beta: float = 0.95
    tx: txsim.TxParams = field(default_factory=txsim.TxParams)
    channel: channel_mod.ChannelParams = field(
        default_factory=channel_mod.ChannelParams)
    detector: rxsim.DetectorParams = field(default_factory=rxsim.DetectorParams)
    plan: DemodPlan = field(default_factory=DemodPlan)
    report_symbol_rate: float | None = None   # key-rate reporting rate, Hz

    def __post_init__(self):
        if self.n_symbols < 1:
            raise ParameterError("n_symbols must be >= 1")
        if not self.v_mod > 0:
            raise ParameterError("v_mod must be > 0")
        if not 0 < self.eta <= 1 or self.v_el < 0:
            raise ParameterError("eta must be in (0, 1] and v_el >= 0")
        if not 0 < self.beta <= 1:
            raise ParameterError("beta must be in (0, 1]")
        if self.n_taps < 1 or self.n_taps % 2 == 0:
            raise ParameterError("n_taps must be odd and >= 1")
        if not 0 < self.mu < 2:
            raise ParameterError("mu must be in (0, 2)")
        if not 0 <= 2 * self.guard + self.n_training < self.n_symbols:
            raise ParameterError("guard/training do not fit in the block")
        if self.detector.eta != self.eta or self.detector.v_el != self.v_el:
            raise ParameterError("detector params must match eta/v_el")

    @property
    def skr_rate(self) -> float:
        return (self.report_symbol_rate if self.report_symbol_rate is not None
                else self.tx.symbol_rate)


_RATE_SCALES = {
    "tx": {"symbol_rate": 1, "dac_rate": 1, "signal_shift": 1,
           "pilot_offset": 1},
    "channel": {"combined_linewidth": 1, "freq_offset": 1, "nominal_offset": 1,
                "freq_drift": 2, "pol_drift_rate": 1, "xi_band_center": 1,
                "xi_bandwidth": 1, "xi_ref_rate": 1, "crosstalk_bw": 1},
    "detector": {"detector_bw": 1, "adc_rate": 1, "lo_offset": 1,
                 "snu_ref_rate": 1},
    "plan": {"symbol_rate": 1, "quantum_center": 1, "quantum_bw": 1,
             "pilot_center": 1, "pilot_bw": 1, "fo_search": 1,
             "compensate_bw": 1},
}


def scale_rates(cfg: SimConfig, factor: float) -> SimConfig:
    """Divide every frequency-like field by ``factor``.

    Quantities per unit time scale as 1/factor, per time squared
    (frequency drift) as 1/factor^2; the sampled records are identical
    to the unscaled run because only rate ratios enter the algorithms.
    The key-rate reporting rate is pinned to the original symbol rate.
    """
    if factor <= 0:
        raise ParameterError("factor must be > 0")
    report = cfg.skr_rate
    parts = {}
    for name, fields in _RATE_SCALES.items():
        sub = getattr(cfg, name)
        updates = {}
        for f, power in fields.items():
            val = getattr(sub, f)
            if val is not None:
                updates[f] = val / factor ** power
        parts[name] = replace(sub, **updates)
    return replace(cfg, report_symbol_rate=report, **parts)


def fast_config(cfg: SimConfig) -> SimConfig:
    """The desk-scale profile: all rates scaled by 1/100."""
    return scale_rates(cfg, 100.0)


def default_config(distance_km: float = 50.0, xi: float = 0.04,
                   n_symbols: int = 100_000, fast: bool = False,
                   **overrides) -> SimConfig:
    """Full-impairment defaults at a given distance.

    The laser difference frequency sits 1 MHz off the receiver's nominal
    LO offset so the raw (pre-DSP) symbols are phase-scrambled, as in a
    free-running LLO system.
    """
    tx = txsim.TxParams(pilot_amplitude=txsim.pilot_amplitude_for(3.9))
    ch = channel_mod.ChannelParams(length_km=distance_km, xi_inject=xi,
                                   freq_offset=2.001e9)
    det = rxsim.DetectorParams()
    plan = DemodPlan(compensate_bw=det.detector_bw)
    cfg = SimConfig(n_symbols=n_symbols, tx=tx, channel=ch, detector=det,
                    plan=plan, **overrides)
    return fast_config(cfg) if fast else cfg


def _sub_policy(master: int, tag: int) -> SeedPolicy:
    """Independent named-stream policy for auxiliary records."""
    child = np.random.SeedSequence([int(master), int(tag)])
    return derive_seeds(int(child.generate_state(1, np.uint64)[0]))


def _transmit(cfg: SimConfig, seeds: SeedPolicy, frame: SymbolFrame | None,
              with_pilot: bool, channel_noise: bool, rx_noise: bool,
              length_km: float | None = None):
    """Build one pair of IF records through tx + channel + rx."""
    n_samp = cfg.n_symbols * cfg.tx.sps
    if frame is not None:
        sig = txsim.shape_and_shift(frame, cfg.tx)
    else:
        sig = Waveform(np.zeros(n_samp, dtype=np.complex64), cfg.tx.dac_rate)
    if with_pilot:
        pil = txsim.make_pilot(n_samp, cfg.tx)
    else:
        pil = Waveform(np.zeros(n_samp, dtype=np.complex64), cfg.tx.dac_rate)
    wave = DualPolWaveform(sig, pil)
    ch = cfg.channel
    if length_km is not None:
        ch = replace(ch, length_km=length_km)
    propagated = channel_mod.apply_channel(wave, ch, seeds,
                                           inject_noise=channel_noise)
    return rxsim.heterodyne_detect(propagated, cfg.detector, seeds,
                                   add_shot=rx_noise, add_elec=rx_noise)


@dataclass
class FrozenDsp:
    """The receiver DSP state of one block, frozen into a linear operator."""

    fo_hat: float
    phase: np.ndarray        # unwrapped pilot phase at pilot_rate
    pilot_rate: float
    offset: int              # record index of the first training symbol
    sync_phase: float        # residual constant phase at the sync peak
    sps: int
    weights: EqualizerWeights | None
    plan: DemodPlan
    n_symbols: int

    def raw_symbols(self, h_if: Waveform, v_if: Waveform):
        """Demodulate + phase-rotate + sample both branches at symbol rate.

        The pilot trajectory removes the phase *dynamics* but carries an
        arbitrary constant offset (the pilot's absolute phase); the
        constant measured at the sync peak is removed here so the raw
        symbols land on Alice's quadrature axes.
        """
        rot = np.complex64(np.exp(-1j * self.sync_phase))
        out = []
        for rec in (h_if, v_if):
            bb, _ = demodulate(rec, self.plan, self.fo_hat)
            bb = apply_phase(bb, self.phase, self.pilot_rate)
            out.append(bb.samples[self.offset::self.sps][:self.n_symbols] * rot)
        return out

    def apply(self, h_if: Waveform, v_if: Waveform) -> np.ndarray:
        """Full frozen chain; returns (2, n_symbols - n_taps + 1)."""
        y_h, y_v = self.raw_symbols(h_if, v_if)
        return equalize(self.weights, streams_from_symbols(y_h, y_v))

    @property
    def delay(self) -> int:
        return self.weights.delay


def _alice_targets(frame: SymbolFrame) -> np.ndarray:
    """Alice SNU quadratures (2, n): sqrt(2) * (X; P)."""
    return np.sqrt(2.0) * np.stack([frame.x, frame.p])


def _acquire(cfg: SimConfig, frame: SymbolFrame,
             h_if: Waveform, v_if: Waveform) -> FrozenDsp:
    """Frequency, phase and timing acquisition (no equalizer yet)."""
    plan = cfg.plan
    try:
        fo_hat = estimate_fo(v_if, plan.pilot_center, plan.fo_search)
    except Exception:
        fo_hat = estimate_fo(h_if, plan.pilot_center, plan.fo_search)
    qs, ps = [], []
    for rec in (h_if, v_if):
        q, p = demodulate(rec, plan, fo_hat)
        qs.append(q)
        ps.append(p)
    # the pilot tone is launched on V but polarization drift can move it
    pbb = max(ps, key=lambda w: w.power())
    phase = pilot_phase(pbb)
    sps = plan.sps(h_if.sample_rate)
    qc = [apply_phase(q, phase, pbb.sample_rate) for q in qs]
    # deep-loss blocks (tens of km of fiber) push the peak-to-sidelobe
    # ratio below the conservative default; 3.8 still clears the maximum
    # expected Rayleigh sidelobe of a record this long by a safe margin
    try:
        offset, sync_phase = symbol_sync(qc[0], frame.training, sps,
                                         min_peak_ratio=3.8)
    except SyncError:
        offset, sync_phase = symbol_sync(qc[1], frame.training, sps,
                                         min_peak_ratio=3.8)
    return FrozenDsp(fo_hat=fo_hat, phase=phase, pilot_rate=pbb.sample_rate,
                     offset=offset, sync_phase=sync_phase, sps=sps,
                     weights=None, plan=plan, n_symbols=cfg.n_symbols)


def train_weights(cfg: SimConfig, frozen: FrozenDsp, frame: SymbolFrame,
                  streams: np.ndarray) -> EqualizerWeights:
    """Data-aided training pass over the known prefix of one block.

    The start point is a scaled identity at the Wiener scalar of the
    co-polarized streams; a coarse NLMS pass is followed by a fine pass
    with a 10x smaller step to shrink the gradient-noise misadjustment,
    which matters because the per-symbol SNR is far below one.
    """
    targets = _alice_targets(frame)
    delay = (cfg.n_taps - 1) // 2
    n_train = cfg.n_training - cfg.n_taps + 1
    tgt = np.ascontiguousarray(targets[:, delay:delay + n_train])
    init = EqualizerWeights.identity(cfg.n_taps, cfg.mu)
    s = streams[:, :n_train + cfg.n_taps - 1]
    for o in (0, 1):
        num = float(np.dot(tgt[o], s[o, delay:delay + n_train]))
        den = float(np.dot(s[o, delay:delay + n_train],
                           s[o, delay:delay + n_train]))
        init.taps[o, o, delay] = num / den if den > 0 else 1.0
    w = lms_train(s, tgt, n_taps=cfg.n_taps, mu=cfg.mu, weights=init)
    return lms_train(s, tgt, n_taps=cfg.n_taps, mu=cfg.mu / 10.0, weights=w)


def build_frozen_dsp(cfg: SimConfig, frame: SymbolFrame,
                     h_if: Waveform, v_if: Waveform) -> FrozenDsp:
    """Run the adaptive part of the receiver once on a data block."""
    frozen = _acquire(cfg, frame, h_if, v_if)
    y_h, y_v = frozen.raw_symbols(h_if, v_if)
    streams = streams_from_symbols(y_h, y_v)
    frozen.weights = train_weights(cfg, frozen, frame, streams)
    return frozen


def chain_snu_scale(cfg: SimConfig, frozen: FrozenDsp, master: int):
    """SNU scale of the frozen chain, from vacuum/electronic records.

    Simulates detector-noise-only records for both branches and passes
    them through the frozen DSP; returns (snu_scale, var_vac, var_el)
    as pooled per-quadrature variances at the equalizer output.
    """
    n_if = frozen.offset + frozen.n_symbols * frozen.sps
    d = cfg.detector

    def noise_pair(kind, tag):
        # generate at the simulation rate so the records pass the same
        # decimation filter as the data; its in-band droop is a percent-
        # level part of the noise variance being calibrated
        fn = rxsim.vacuum_record if kind == "vac" else rxsim.electronic_record
        h = fn(n_if, d, _sub_policy(master, tag), sim_rate=cfg.tx.dac_rate)
        v = fn(n_if, d, _sub_policy(master, tag + 1), sim_rate=cfg.tx.dac_rate)
        out = frozen.apply(h, v)
        g = cfg.guard
        return float(out[:, g:out.shape[1] - g].var())

    var_vac = noise_pair("vac", 101)
    var_el = noise_pair("el", 103)
    scale = var_vac - var_el
    if scale <= 0:
        raise ParameterError("vacuum calibration produced non-positive scale")
    return scale, var_vac, var_el


def _aligned(cfg: SimConfig, frozen: FrozenDsp, frame: SymbolFrame,
             out: np.ndarray):
    """Guard-trimmed (alice_x, alice_p, out_block) with symbol alignment.

    The training prefix is excluded: those symbols are publicly revealed,
    and the equalizer trained on them partially cancels their noise, so
    keeping them would bias the residual-variance estimate low.
    """
    g = cfg.guard
    sl = slice(cfg.n_training + g, out.shape[1] - g)
    a = frame.symbols[frozen.delay:frozen.delay + out.shape[1]][sl]
    return a, out[:, sl]


@dataclass
class SimResult:
    """Everything one block run produces."""

    estimate: NoiseEstimate
    report: KeyRateReport
    alice: np.ndarray        # aligned complex symbols
    bob_x: np.ndarray        # SNU quadratures
    bob_p: np.ndarray
    snu_scale: float
    v_el_hat: float
    fo_hat: float
    pearson_before: float
    pearson_after: float
    eq_final_mse: float
    sync_offset: int


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.corrcoef(a, b)[0, 1])


def pearson_prediction(t: float, eta: float, v_mod: float, xi: float,
                       v_el: float) -> float:
    """Analytic Alice/Bob quadrature correlation for the heterodyne model."""
    sig = eta * t * v_mod / 2.0
    tot = sig + 1.0 + v_el + eta * t * xi / 2.0
    return float(np.sqrt(sig / tot))


def security_params(cfg: SimConfig, est: NoiseEstimate) -> SecurityParams:
    return SecurityParams(v_mod=cfg.v_mod, transmittance=est.T_hat,
                          xi=max(est.xi_hat, 0.0), eta=cfg.eta,
                          v_el=cfg.v_el, beta=cfg.beta,
                          symbol_rate=cfg.skr_rate)


def simulate_once(cfg: SimConfig, seed: int) -> SimResult:
    """One honest end-to-end block: no replay tricks, experiment-style."""
    seeds = derive_seeds(seed)
    frame = gaussian_symbols(cfg.n_symbols, cfg.v_mod, seeds,
                             n_training=cfg.n_training)
    h_if, v_if = _transmit(cfg, seeds, frame, with_pilot=True,
                           channel_noise=True, rx_noise=True)
    frozen = build_frozen_dsp(cfg, frame, h_if, v_if)
    # raw correlation diagnostic: nominal down-conversion only, i.e. no
    # FO correction, no phase tracking, no equalizer
    raw_bb, _ = demodulate(h_if, cfg.plan)
    raw = raw_bb.samples[frozen.offset::frozen.sps][:cfg.n_symbols]
    sl = slice(cfg.guard, cfg.n_symbols - cfg.guard)
    r_before = _pearson(frame.x[sl], raw.real.astype(np.float64)[sl])

    out = frozen.apply(h_if, v_if)
    snu, var_vac, var_el = chain_snu_scale(cfg, frozen, seed)
    a, y = _aligned(cfg, frozen, frame, out)
    root = np.sqrt(snu)
    bob_x = y[0] / root
    bob_p = y[1] / root
    aligned_frame = SymbolFrame(a)
    est = estimate_channel(aligned_frame, bob_x, bob_p, cfg.eta, cfg.v_el,
                           var_vacuum=var_vac / snu,
                           min_block=min(10_000, a.size))
    r_after = _pearson(np.sqrt(2.0) * a.real, bob_x)
    report = skr(security_params(cfg, est))
    return SimResult(estimate=est, report=report, alice=a, bob_x=bob_x,
                     bob_p=bob_p, snu_scale=snu, v_el_hat=var_el / snu,
                     fo_hat=frozen.fo_hat, pearson_before=r_before,
                     pearson_after=r_after,
                     eq_final_mse=frozen.weights.final_mse,
                     sync_offset=frozen.offset)


def estimate_linked(cfg: SimConfig, seed: int, block_id: int = 0):
    """Common-random-numbers estimate of (T, xi) for one block.

    Returns (NoiseEstimate, FrozenDsp).  See the module docstring for
    the three linked runs and the exact cancellation they provide.
    """
    seeds = derive_seeds(seed)
    frame = gaussian_symbols(cfg.n_symbols, cfg.v_mod, seeds,
                             n_training=cfg.n_training)
    h_d, v_d = _transmit(cfg, seeds, frame, with_pilot=True,
                         channel_noise=True, rx_noise=True)
    frozen = _acquire(cfg, frame, h_d, v_d)

    # train the equalizer on the noiseless probe: the frozen operator is
    # then independent of every noise realization it will measure
    h_p, v_p = _transmit(cfg, derive_seeds(seed), frame, with_pilot=False,
                         channel_noise=False, rx_noise=False, length_km=0.0)
    probe_streams = streams_from_symbols(*frozen.raw_symbols(h_p, v_p))
    frozen.weights = train_weights(cfg, frozen, frame, probe_streams)
    y_probe = equalize(frozen.weights, probe_streams)
    del h_p, v_p, probe_streams

    y_data = frozen.apply(h_d, v_d)
    del h_d, v_d

    h_r, v_r = _transmit(cfg, derive_seeds(seed), None, with_pilot=True,
                         channel_noise=False, rx_noise=True)
    y_ref = frozen.apply(h_r, v_r)
    del h_r, v_r

    _, d = _aligned(cfg, frozen, frame, y_data - y_ref)
    a, y0 = _aligned(cfg, frozen, frame, y_probe)

    num = float(np.sum(y0 * d))
    den = float(np.sum(y0 * y0))
    root_t = num / den
    t_hat = root_t * root_t
    if not 0 < t_hat <= 1.05:
        raise ParameterError(f"linked estimate out of range: T_hat {t_hat!r}")
    t_hat = min(t_hat, 1.0)

    snu, _, _ = chain_snu_scale(cfg, frozen, seed)
    var_r = float((d - root_t * y0).var()) / snu
    xi_hat = 2.0 * var_r / (cfg.eta * t_hat)

    ax = np.sqrt(2.0) * np.concatenate([a.real, a.imag])
    g0 = float(np.dot(ax, np.concatenate([y0[0], y0[1]])) / np.dot(ax, ax))
    est = NoiseEstimate(T_hat=t_hat, xi_hat=xi_hat, block_size=a.size,
                        block_id=block_id, g_hat=g0 * root_t / np.sqrt(snu))
    return est, frozen


def block_seed(master: int, block_id: int) -> int:
    """Schedule-independent per-block seed."""
    ss = np.random.SeedSequence([int(master), int(block_id)])
    return int(ss.generate_state(1, np.uint64)[0])


def noise_timeseries(cfg: SimConfig, n_blocks: int, seed: int = 0):
    """Repeated simulate-estimate cycles; returns a list of NoiseEstimate.

    Each block draws fresh symbol, channel and detection randomness from
    a per-block seed, modelling an evolving channel; estimates use the
    linked-run instrument so per-block excess noise resolves milli-SNU.
    """
    if n_blocks < 0:
        raise ParameterError("n_blocks must be >= 0")
    out = []
    for b in range(n_blocks):
        est, _ = estimate_linked(cfg, block_seed(seed, b), block_id=b)
        out.append(est)
    return out
