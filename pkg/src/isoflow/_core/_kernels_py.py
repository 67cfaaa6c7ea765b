"""Facet-local hot kernels, pure numpy implementation.

This module mirrors the compiled extension ``isoflow._core._kernels``; the
package selects one of the two at import time (see ``isoflow._core``).  Both
implementations must stay semantically identical -- the parity test suite
compares them element by element.

Coefficient layout: ``F[f, i, j]`` is the coefficient of the i-th coframe
basis element tensored with the j-th target basis vector on facet ``f``.
The coframe (du1, du2) is orthonormal in the facet chart, and target columns
are paired as complex lines: multiplication by i maps column 2k to 2k+1 and
column 2k+1 to -(2k).
"""

import numpy as np


def mult_i(F, out=None):
    """Multiply target values by i, column pairs (2k, 2k+1) -> (-c_{2k+1}, c_{2k})."""
    if out is None:
        out = np.empty_like(F)
    even = F[:, :, 0::2]
    if out is F:
        even = even.copy()
    out[:, :, 0::2] = -F[:, :, 1::2]
    out[:, :, 1::2] = even
    return out


def rotate_form(F, out=None):
    """Compose with the facet quarter-turn: row rule (c1, c2) -> (-c2, c1)."""
    if out is None:
        out = np.empty_like(F)
    row0 = F[:, 0, :]
    if out is F:
        row0 = row0.copy()
    out[:, 0, :] = -F[:, 1, :]
    out[:, 1, :] = row0
    return out


def pm_involution(F, out=None):
    """Quarter-turn composition followed by target i; a linear isometric involution.

    Its +1/-1 eigenspaces are the complex-linear / anti-complex-linear forms.
    """
    if out is None:
        out = np.empty_like(F)
    if out is F:
        F = F.copy()
    out[:, 0, 0::2] = F[:, 1, 1::2]
    out[:, 0, 1::2] = -F[:, 1, 0::2]
    out[:, 1, 0::2] = -F[:, 0, 1::2]
    out[:, 1, 1::2] = F[:, 0, 0::2]
    return out


def moment_density(F, out=None):
    """Per-facet symplectic density -<involution(F), F>/2 = -sum_k det of the k-th pair."""
    det = F[:, 0, 0::2] * F[:, 1, 1::2] - F[:, 0, 1::2] * F[:, 1, 0::2]
    mu = -det.sum(axis=1)
    if out is None:
        return mu
    out[:] = mu
    return out


def gradient_coeffs(F, mu, out=None):
    """Energy gradient coefficients: -mu_f * (involution F)_f per facet."""
    out = pm_involution(F, out)
    out *= -mu[:, None, None]
    return out


def weighted_dot(F, H, areas):
    """Area-weighted L2 pairing sum_f area_f <F_f, H_f>."""
    return float(np.einsum("fij,fij,f->", F, H, areas))


def weighted_norm_sq(F, areas):
    """Area-weighted squared L2 norm."""
    return float(np.einsum("fij,fij,f->", F, F, areas))


def energy_from_density(mu, areas):
    """Half the area-weighted squared L2 norm of a per-facet density."""
    return 0.5 * float(np.einsum("f,f,f->", mu, mu, areas))
