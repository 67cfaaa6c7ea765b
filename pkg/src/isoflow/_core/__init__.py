"""Kernel backend selection.

The facet-local kernels exist twice: a Cython extension (``_kernels``) and a
pure numpy fallback (``_kernels_py``).  The compiled module is preferred when
importable; set the environment variable ``ISOFLOW_PURE_PYTHON=1`` to force
the fallback (used by the benchmark and the parity tests).
"""

import os

from . import _kernels_py

if os.environ.get("ISOFLOW_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

mult_i = _impl.mult_i
rotate_form = _impl.rotate_form
pm_involution = _impl.pm_involution
moment_density = _impl.moment_density
gradient_coeffs = _impl.gradient_coeffs
weighted_dot = _impl.weighted_dot
weighted_norm_sq = _impl.weighted_norm_sq
energy_from_density = _impl.energy_from_density

__all__ = [
    "BACKEND",
    "mult_i",
    "rotate_form",
    "pm_involution",
    "moment_density",
    "gradient_coeffs",
    "weighted_dot",
    "weighted_norm_sq",
    "energy_from_density",
]
