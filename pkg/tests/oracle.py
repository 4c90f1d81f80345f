"""Numeric symplectic-eigenvalue oracle.

Builds the two-mode covariance matrix of the entanglement-based picture
explicitly, models the trusted detector as a beam splitter of
transmittance eta mixed with one arm of an EPR state whose variance
reproduces the electronic noise, performs the (heterodyne or homodyne)
measurement by Schur complement, and reads off symplectic eigenvalues as
the moduli of the eigenvalues of i * Omega * Gamma.  Entirely
independent of the closed forms under test.
"""

import numpy as np
from scipy.linalg import block_diag

_SZ = np.diag([1.0, -1.0])
_I2 = np.eye(2)


def _omega(n_modes: int) -> np.ndarray:
    w = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return block_diag(*([w] * n_modes))


def symplectic_eigenvalues(gamma: np.ndarray) -> np.ndarray:
    """Descending symplectic spectrum of a covariance matrix."""
    n = gamma.shape[0] // 2
    ev = np.linalg.eigvals(1j * _omega(n) @ gamma)
    lam = np.sort(np.abs(ev))[::2]  # eigenvalues come in +- pairs
    return np.sort(lam)[::-1]


def numeric_spectra(v_mod, t, xi, eta, v_el, detection="heterodyne"):
    """(lambda_1, lambda_2), (lambda_3, lambda_4, lambda_5) from explicit
    covariance matrices."""
    v = v_mod + 1.0
    chi_line = 1.0 / t - 1.0 + xi
    c = np.sqrt(t * (v * v - 1.0))
    g_ab = np.block([[v * _I2, c * _SZ],
                     [c * _SZ, t * (v + chi_line) * _I2]])
    lam12 = np.sort(symplectic_eigenvalues(g_ab))[::-1]

    # trusted detector: BS(eta) between B and one arm of EPR(v_n)
    if eta < 1.0:
        if detection == "heterodyne":
            v_n = 1.0 + 2.0 * v_el / (1.0 - eta)
        else:
            v_n = 1.0 + v_el / (1.0 - eta)
    else:
        v_n = 1.0
    c_f = np.sqrt(max(v_n * v_n - 1.0, 0.0))
    g_f = np.block([[v_n * _I2, c_f * _SZ],
                    [c_f * _SZ, v_n * _I2]])
    g = block_diag(g_ab, g_f)  # modes A, B, F0, F1
    s = np.eye(8)
    se, sr = np.sqrt(eta), np.sqrt(1.0 - eta)
    s[2:4, 2:4] = se * _I2
    s[2:4, 4:6] = sr * _I2
    s[4:6, 2:4] = -sr * _I2
    s[4:6, 4:6] = se * _I2
    g = s @ g @ s.T

    keep = [0, 1, 4, 5, 6, 7]
    g_rest = g[np.ix_(keep, keep)]
    g_cross = g[np.ix_(keep, [2, 3])]
    g_b = g[2:4, 2:4]
    if detection == "heterodyne":
        g_cond = g_rest - g_cross @ np.linalg.inv(g_b + _I2) @ g_cross.T
    else:
        proj = np.diag([1.0, 0.0])
        g_cond = g_rest - g_cross @ np.linalg.pinv(proj @ g_b @ proj) @ g_cross.T
    lam345 = np.sort(symplectic_eigenvalues(g_cond))[::-1]
    return lam12, lam345
