"""Pure-numpy implementations of the hot kernels.

Signatures mirror ``rfamp._kernels`` exactly; ``rfamp.kernels`` picks one at
import time.
"""

import numpy as np


def mcr_stage_voltage(k, w0, q, rs, cs, r2, gm, omegas):
    """Stage voltage gain gm*I11*Z21/2 of a symmetric MCR (all SI units).

    ``omegas`` are real angular frequencies; the result is complex.
    """
    s = 1j * np.asarray(omegas, dtype=float)
    k2 = 1.0 - k * k
    p = (k2 * q * q * s**4 + 2 * k2 * q * w0 * s**3 + (k2 + 2 * q * q) * w0**2 * s**2
         + 2 * q * w0**3 * s + q * q * w0**4)
    n = k2 * q * s * s + k2 * w0 * s + w0 * w0 * q
    y11 = p / (rs * w0 * s * n)
    z21 = k * q * w0**3 * np.sqrt(rs * r2) * s / p
    zl = 1.0 / y11
    zs = rs / (1.0 + s * rs * cs)
    i11 = gm * (zs + 50.0) / zs * zs / (zs + zl)
    return i11 * z21 / 2.0


def chain_backsolve(abcd):
    """States [V, I] at every block boundary for an open-circuited output.

    ``abcd`` has shape (nblocks, nfreq, 2, 2); the result has shape
    (nblocks + 1, nfreq, 2) with the last row equal to [1, 0].
    """
    abcd = np.asarray(abcd, dtype=complex)
    nb, nf = abcd.shape[:2]
    states = np.empty((nb + 1, nf, 2), dtype=complex)
    states[nb, :, 0] = 1.0
    states[nb, :, 1] = 0.0
    for j in range(nb - 1, -1, -1):
        states[j] = np.einsum("fij,fj->fi", abcd[j], states[j + 1])
    return states


def impedance_forward(abcd, z0):
    """Impedance seen looking back into the chain output from a source ``z0``."""
    abcd = np.asarray(abcd, dtype=complex)
    z = np.full(abcd.shape[1], complex(z0))
    for blk in abcd:
        a, b, c, d = blk[:, 0, 0], blk[:, 0, 1], blk[:, 1, 0], blk[:, 1, 1]
        z = (d * z + b) / (c * z + a)
    return z
