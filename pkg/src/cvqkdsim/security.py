"""Asymptotic secret key rate for the GMCS protocol under collective attacks.

Trusted-detector model: channel loss and excess noise are attributed to
Eve, detector efficiency and electronic noise are not.  The closed-form
symplectic eigenvalues below are the standard ones for one-way Gaussian
protocols with homodyne or heterodyne detection; they are cross-checked
against an explicit covariance-matrix construction in the test suite.

Conventions (frozen after calibration against the reference operating
points): heterodyne detection, excess noise referred to the channel
input, modulation variance as total complex-symbol variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ParameterError, check_variance


class NumericalDomainError(ArithmeticError):
    """Symplectic spectrum left its physical domain for the given parameters."""


@dataclass(frozen=True)
class SecurityParams:
    v_mod: float            # modulation variance V_A, SNU
    transmittance: float    # channel power transmittance T
    xi: float               # excess noise, SNU, channel-input referred
    eta: float = 0.56       # trusted receiver efficiency
    v_el: float = 0.16      # trusted electronic noise, SNU
    beta: float = 0.95      # reconciliation efficiency
    symbol_rate: float = 1e9
    detection: str = "heterodyne"

    def __post_init__(self):
        check_variance("v_mod", self.v_mod)
        check_variance("xi", self.xi)
        check_variance("v_el", self.v_el)
        if not 0 < self.transmittance <= 1:
            raise ParameterError("transmittance must be in (0, 1]")
        if not 0 < self.eta <= 1:
            raise ParameterError("eta must be in (0, 1]")
        if not 0 < self.beta <= 1:
            raise ParameterError("beta must be in (0, 1]")
        if self.symbol_rate <= 0:
            raise ParameterError("symbol_rate must be > 0")
        if self.detection not in ("homodyne", "heterodyne"):
            raise ParameterError("detection must be 'homodyne' or 'heterodyne'")


@dataclass(frozen=True)
class KeyRateReport:
    i_ab: float             # bits / symbol
    chi_eb: float           # bits / symbol
    skr_per_symbol: float   # bits / symbol, signed (not clamped)
    skr_bps: float          # bits / second
    eigenvalues: tuple      # (lambda1 .. lambda4)


def g_func(x: float) -> float:
    """Bosonic entropy function G(x) = (x+1)log2(x+1) - x log2(x), G(0) = 0."""
    x = float(x)
    if x < -1e-9:
        raise NumericalDomainError(f"g_func argument {x} below domain")
    if x <= 1e-12:
        return 0.0
    return float((x + 1) * np.log2(x + 1) - x * np.log2(x))


def _noise_terms(p: SecurityParams):
    v = p.v_mod + 1.0
    chi_line = 1.0 / p.transmittance - 1.0 + p.xi
    if p.detection == "heterodyne":
        chi_det = (2.0 - p.eta + 2.0 * p.v_el) / p.eta
    else:
        chi_det = (1.0 - p.eta + p.v_el) / p.eta
    chi_tot = chi_line + chi_det / p.transmittance
    return v, chi_line, chi_det, chi_tot


def _pair_from_quadratic(s: float, prod: float, where: str):
    """Solve lam^2 pairs from sum s and product prod of the squares."""
    disc = s * s - 4.0 * prod
    if disc < -1e-9 * max(s * s, 1.0):
        raise NumericalDomainError(f"negative discriminant in {where}: {disc}")
    root = np.sqrt(max(disc, 0.0))
    lam_sq = ((s + root) / 2.0, (s - root) / 2.0)
    lams = []
    # near-degenerate pairs (disc ~ eps) split by sqrt(eps) ~ 1e-8, so
    # the below-unity guard must be looser than that amplification
    for ls in lam_sq:
        if ls < (1.0 - 1e-7) ** 2:
            raise NumericalDomainError(f"symplectic eigenvalue below 1 in {where}: {ls}")
        lams.append(float(np.sqrt(max(ls, 1.0))))
    return lams


def holevo_bound(p: SecurityParams):
    """Holevo bound chi_EB and the four symplectic eigenvalues."""
    v, chi_line, chi_det, chi_tot = _noise_terms(p)
    t = p.transmittance
    a = v * v * (1 - 2 * t) + 2 * t + t * t * (v + chi_line) ** 2
    b = t * t * (v * chi_line + 1) ** 2
    lam1, lam2 = _pair_from_quadratic(a, b, "joint state")

    sqrt_b = np.sqrt(b)
    denom = t * (v + chi_tot)
    if p.detection == "heterodyne":
        c = (a * chi_det ** 2 + b + 1
             + 2 * chi_det * (v * sqrt_b + t * (v + chi_line))
             + 2 * t * (v * v - 1)) / denom ** 2
        d = ((v + sqrt_b * chi_det) / denom) ** 2
    else:
        c = (v * sqrt_b + t * (v + chi_line) + a * chi_det) / denom
        d = sqrt_b * (v + sqrt_b * chi_det) / denom
    lam3, lam4 = _pair_from_quadratic(c, d, "conditional state")

    chi_eb = (g_func((lam1 - 1) / 2) + g_func((lam2 - 1) / 2)
              - g_func((lam3 - 1) / 2) - g_func((lam4 - 1) / 2))
    return chi_eb, (lam1, lam2, lam3, lam4)


def mutual_information(p: SecurityParams) -> float:
    """Shannon mutual information between Alice and Bob, bits per symbol."""
    v, _, _, chi_tot = _noise_terms(p)
    snr_term = (v + chi_tot) / (1 + chi_tot)
    if p.detection == "heterodyne":
        return float(np.log2(snr_term))
    return float(0.5 * np.log2(snr_term))


def skr(p: SecurityParams) -> KeyRateReport:
    """Asymptotic secret key rate; negative rates are reported, not clamped."""
    i_ab = mutual_information(p)
    chi_eb, lams = holevo_bound(p)
    per_symbol = p.beta * i_ab - chi_eb
    return KeyRateReport(
        i_ab=i_ab,
        chi_eb=chi_eb,
        skr_per_symbol=per_symbol,
        skr_bps=p.symbol_rate * per_symbol,
        eigenvalues=lams,
    )


def null_threshold(p: SecurityParams, tol: float = 1e-6, xi_max: float = 1.0) -> float:
    """Excess noise xi* at which the key rate crosses zero.

    Bisection on [0, xi_max]; the rate is strictly decreasing in xi, so
    the root is unique when it exists.
    """
    def rate(xi):
        q = SecurityParams(p.v_mod, p.transmittance, xi, p.eta, p.v_el,
                           p.beta, p.symbol_rate, p.detection)
        return skr(q).skr_per_symbol

    lo, hi = 0.0, xi_max
    r_lo = rate(lo)
    if r_lo <= 0:
        raise ParameterError("key rate is not positive at xi = 0; no threshold")
    if rate(hi) > 0:
        raise ParameterError(f"key rate still positive at xi = {xi_max}")
    while True:
        mid = (lo + hi) / 2
        r = rate(mid)
        if abs(r) < tol or (hi - lo) < 1e-12:
            return mid
        if r > 0:
            lo = mid
        else:
            hi = mid
