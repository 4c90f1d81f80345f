"""Shared numeric types, unit conventions and deterministic seeding.

Unit conventions used throughout the package:

* Quadratures are expressed in shot-noise units (SNU): the vacuum
  variance per quadrature is 1.
* The modulation variance ``V_A`` is the *total* variance of the complex
  symbol, ``Var(X) + Var(P) = V_A``, so each quadrature carries
  ``V_A / 2``.  Every consumer of ``V_A`` (estimation, security) uses
  this single convention.
* Frequencies are stored as absolute Hz, but all algorithms only ever
  use the ratio ``f / sample_rate``, so scaling every rate by a common
  factor leaves the simulation unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Invalid physical or numerical parameter."""


def check_variance(name: str, value: float) -> float:
    """Validate a variance-like quantity in SNU (must be finite and >= 0)."""
    v = float(value)
    if not np.isfinite(v) or v < 0:
        raise ParameterError(f"{name} must be finite and >= 0, got {value!r}")
    return v


@dataclass(frozen=True)
class SymbolFrame:
    """A block of complex Gaussian symbols (X + iP, both in SNU).

    The first ``n_training`` symbols are the known training prefix used
    by the data-aided equalizer; the rest is payload.
    """

    symbols: np.ndarray
    n_training: int = 0
    frame_id: int = 0

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=np.complex128)
        object.__setattr__(self, "symbols", sym)
        if sym.ndim != 1 or sym.size == 0:
            raise ParameterError("symbols must be a non-empty 1-d array")
        if not np.all(np.isfinite(sym)):
            raise ParameterError("symbols must be finite")
        if not 0 <= self.n_training <= sym.size:
            raise ParameterError("training region must fit inside the frame")

    def __len__(self) -> int:
        return self.symbols.size

    @property
    def training(self) -> np.ndarray:
        return self.symbols[: self.n_training]

    @property
    def payload(self) -> np.ndarray:
        return self.symbols[self.n_training:]

    @property
    def x(self) -> np.ndarray:
        return self.symbols.real

    @property
    def p(self) -> np.ndarray:
        return self.symbols.imag


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled real or complex signal."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        s = np.asarray(self.samples)
        object.__setattr__(self, "samples", s)
        if s.ndim != 1 or s.size == 0:
            raise ParameterError("samples must be a non-empty 1-d array")
        if not self.sample_rate > 0:
            raise ParameterError("sample_rate must be > 0")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class DualPolWaveform:
    """Two co-propagating complex envelopes: h = quantum, v = pilot."""

    h: Waveform
    v: Waveform

    def __post_init__(self):
        if len(self.h) != len(self.v):
            raise ParameterError("polarization branches must have equal length")
        if self.h.sample_rate != self.v.sample_rate:
            raise ParameterError("polarization branches must share a sample rate")

    @property
    def sample_rate(self) -> float:
        return self.h.sample_rate

    def __len__(self) -> int:
        return len(self.h)


# Named random streams, one per stochastic source.  The split is stable:
# children are spawned from SeedSequence(master) in this fixed order.
_STREAMS = (
    "tx_symbols",
    "channel_phase",
    "channel_jones",
    "channel_xi",
    "channel_crosstalk",
    "rx_shot",
    "rx_elec",
    "misc",
)


@dataclass(frozen=True)
class SeedPolicy:
    """Deterministic per-stage random streams derived from one master seed.

    The same master seed always yields bit-identical simulations.  Each
    stochastic source gets its own child stream, so one source can be
    toggled on/off without perturbing the realizations of the others
    (used for paired variance-reduction runs).
    """

    master: int
    _children: dict = field(repr=False, default=None)

    def __post_init__(self):
        ss = np.random.SeedSequence(self.master)
        children = dict(zip(_STREAMS, ss.spawn(len(_STREAMS))))
        object.__setattr__(self, "_children", children)

    def rng(self, stream: str) -> np.random.Generator:
        if stream not in self._children:
            raise ParameterError(f"unknown random stream {stream!r}")
        return np.random.default_rng(self._children[stream])

    def stream_state(self, stream: str) -> tuple:
        """Stable fingerprint of a child stream (for tests/documentation)."""
        return tuple(self._children[stream].generate_state(4))

    @property
    def streams(self) -> tuple:
        return _STREAMS


def derive_seeds(master: int) -> SeedPolicy:
    """Build the per-stage seed policy for a 64-bit master seed."""
    return SeedPolicy(int(master))


def gaussian_symbols(n: int, v_mod: float, seeds: SeedPolicy,
                     n_training: int = 0, frame_id: int = 0) -> SymbolFrame:
    """Draw ``n`` Gaussian symbols with total modulation variance ``v_mod``.

    X and P are i.i.d. zero-mean Gaussian with variance ``v_mod / 2``
    each, so Var(X) + Var(P) = v_mod.  If ``n_training > 0`` the first
    symbols are replaced by a known constant-modulus (QPSK-like) prefix
    with the same mean energy, which stabilizes LMS training at low SNR.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    check_variance("v_mod", v_mod)
    rng = seeds.rng("tx_symbols")
    sigma = np.sqrt(v_mod / 2.0)
    sym = rng.normal(0.0, 1.0, size=(2, n))
    sym = sigma * (sym[0] + 1j * sym[1])
    if n_training:
        if n_training > n:
            raise ParameterError("n_training must be <= n")
        sym[:n_training] = training_sequence(n_training, v_mod, seeds)
    return SymbolFrame(sym, n_training=n_training, frame_id=frame_id)


def training_sequence(n: int, v_mod: float, seeds: SeedPolicy) -> np.ndarray:
    """Known QPSK-like prefix: quadratures +-sqrt(v_mod/2), mean energy v_mod.

    Drawn from a dedicated stream so the prefix does not depend on the
    payload length.
    """
    check_variance("v_mod", v_mod)
    rng = seeds.rng("misc")
    bits = rng.integers(0, 2, size=(2, n)) * 2 - 1
    a = np.sqrt(v_mod / 2.0)
    return a * (bits[0] + 1j * bits[1])
