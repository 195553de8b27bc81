"""Numpy fallback for the stepper's elementwise kernels.

Mirrors ksefix._kernels (the Cython extension). Everything operates on
half-spectrum arrays of shape (n, n//2 + 1) produced by rfft2, except
``neg_half_grad_sq`` which works on (n, n) physical samples. Table arrays
(E, E2, Q, f1, f2, f3, kx, ky, mask) are float64.
"""

import numpy as np


def grad_pair(v, kx, ky):
    """Spectra of (d/dx, d/dy): multiply by i*k with pre-zeroed Nyquist."""
    return 1j * kx * v, 1j * ky * v


def neg_half_grad_sq(px, py):
    """-(px^2 + py^2)/2 on the physical grid."""
    return -0.5 * (px * px + py * py)


def mask_mean0(wh, mask, fh=None):
    """Dealias, add the (optional) forcing spectrum and zero the mean mode.

    Mutates and returns ``wh``.
    """
    wh *= mask
    if fh is not None:
        wh += fh
    wh[0, 0] = 0.0
    return wh


def stage_ab(e2, v, q, n1):
    """ETDRK4 half-step stage: E2*v + Q*N."""
    return e2 * v + q * n1


def stage_c(e2, a, q, nb, nv):
    """ETDRK4 third stage: E2*a + Q*(2*Nb - Nv)."""
    return e2 * a + q * (2.0 * nb - nv)


def combine(e, v, f1, nv, f2, na, nb, f3, nc):
    """ETDRK4 final combination: E*v + f1*Nv + f2*(Na+Nb) + f3*Nc."""
    return e * v + f1 * nv + f2 * (na + nb) + f3 * nc
