# cython: boundscheck=False, wraparound=False, cdivision=True
"""Facet-local hot kernels, compiled implementation.

Semantics must match ``isoflow._core._kernels_py`` exactly; see that module
for the coefficient layout.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def mult_i(F, out=None):
    """Multiply target values by i, column pairs (2k, 2k+1) -> (-c_{2k+1}, c_{2k})."""
    if out is None:
        out = np.empty_like(F)
    cdef const double[:, :, ::1] f = F
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t nf = f.shape[0], dim = f.shape[2]
    cdef Py_ssize_t s, i, k
    cdef double even
    for s in range(nf):
        for i in range(2):
            for k in range(0, dim, 2):
                even = f[s, i, k]
                o[s, i, k] = -f[s, i, k + 1]
                o[s, i, k + 1] = even
    return out


def rotate_form(F, out=None):
    """Compose with the facet quarter-turn: row rule (c1, c2) -> (-c2, c1)."""
    if out is None:
        out = np.empty_like(F)
    cdef const double[:, :, ::1] f = F
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t nf = f.shape[0], dim = f.shape[2]
    cdef Py_ssize_t s, j
    cdef double row0
    for s in range(nf):
        for j in range(dim):
            row0 = f[s, 0, j]
            o[s, 0, j] = -f[s, 1, j]
            o[s, 1, j] = row0
    return out


def pm_involution(F, out=None):
    """Quarter-turn composition followed by target i; a linear isometric involution."""
    if out is None:
        out = np.empty_like(F)
    cdef const double[:, :, ::1] f = F
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t nf = f.shape[0], dim = f.shape[2]
    cdef Py_ssize_t s, k
    cdef double a, b, c, d
    for s in range(nf):
        for k in range(0, dim, 2):
            a = f[s, 0, k]
            b = f[s, 0, k + 1]
            c = f[s, 1, k]
            d = f[s, 1, k + 1]
            o[s, 0, k] = d
            o[s, 0, k + 1] = -c
            o[s, 1, k] = -b
            o[s, 1, k + 1] = a
    return out


def moment_density(F, out=None):
    """Per-facet symplectic density -<involution(F), F>/2 = -sum_k det of the k-th pair."""
    if out is None:
        out = np.empty(F.shape[0], dtype=np.float64)
    cdef const double[:, :, ::1] f = F
    cdef double[::1] o = out
    cdef Py_ssize_t nf = f.shape[0], dim = f.shape[2]
    cdef Py_ssize_t s, k
    cdef double acc
    for s in range(nf):
        acc = 0.0
        for k in range(0, dim, 2):
            acc += f[s, 0, k] * f[s, 1, k + 1] - f[s, 0, k + 1] * f[s, 1, k]
        o[s] = -acc
    return out


def gradient_coeffs(F, mu, out=None):
    """Energy gradient coefficients: -mu_f * (involution F)_f per facet."""
    if out is None:
        out = np.empty_like(F)
    cdef const double[:, :, ::1] f = F
    cdef const double[::1] m = mu
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t nf = f.shape[0], dim = f.shape[2]
    cdef Py_ssize_t s, k
    cdef double a, b, c, d, w
    for s in range(nf):
        w = -m[s]
        for k in range(0, dim, 2):
            a = f[s, 0, k]
            b = f[s, 0, k + 1]
            c = f[s, 1, k]
            d = f[s, 1, k + 1]
            o[s, 0, k] = w * d
            o[s, 0, k + 1] = -w * c
            o[s, 1, k] = -w * b
            o[s, 1, k + 1] = w * a
    return out


def weighted_dot(F, H, areas):
    """Area-weighted L2 pairing sum_f area_f <F_f, H_f>."""
    cdef const double[:, :, ::1] f = F
    cdef const double[:, :, ::1] h = H
    cdef const double[::1] a = areas
    cdef Py_ssize_t nf = f.shape[0], dim = f.shape[2]
    cdef Py_ssize_t s, i, j
    cdef double acc = 0.0, facet
    for s in range(nf):
        facet = 0.0
        for i in range(2):
            for j in range(dim):
                facet += f[s, i, j] * h[s, i, j]
        acc += a[s] * facet
    return acc


def weighted_norm_sq(F, areas):
    """Area-weighted squared L2 norm."""
    return weighted_dot(F, F, areas)


def energy_from_density(mu, areas):
    """Half the area-weighted squared L2 norm of a per-facet density."""
    cdef const double[::1] m = mu
    cdef const double[::1] a = areas
    cdef Py_ssize_t nf = m.shape[0]
    cdef Py_ssize_t s
    cdef double acc = 0.0
    for s in range(nf):
        acc += a[s] * m[s] * m[s]
    return 0.5 * acc
