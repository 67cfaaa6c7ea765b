"""Discrete 1-forms with values in C^m and their flat Kähler algebra.

A form assigns to every facet a constant linear map from the facet plane to
R^{2m}, stored as a real (2, 2m) coefficient block in the facet's orthonormal
coframe.  Because the coframe is orthonormal and target columns pair up as
complex lines, all the structural operators (multiplication by i, the
quarter-turn composition, their product) act by signed index shuffles and are
exact in floating point; the only rounding happens in the area-weighted inner
product.

Operator conventions (0-based column pairs (2k, 2k+1) form the k-th complex
line):

* ``mult_i``        -- (iF)[i, 2k] = -F[i, 2k+1],  (iF)[i, 2k+1] = F[i, 2k]
* ``rotate_form``   -- (JF)[0, j] = -F[1, j],      (JF)[1, j] = F[0, j]
* ``pm_involution`` -- mult_i(rotate_form(F)); +1/-1 eigenspaces are the
  complex-linear / anti-complex-linear blocks, giving the plus/minus split.

The per-facet gauge group of nonzero complex scalars acts by
lambda . F = conj(lambda)^{-1} F_plus + lambda F_minus; for unit scalars this
is plain complex multiplication and an isometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core as kernels
from .mesh import TriangulatedSurface


@dataclass(frozen=True)
class TargetSpace:
    """Hermitian target C^m viewed as R^{2m} with columns (2k, 2k+1) a complex line."""

    m: int = 2

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("target complex dimension must satisfy m >= 1")

    @property
    def dim(self):
        return 2 * self.m


class DiscreteOneForm:
    """Per-facet coefficient block tied to one mesh and one target space.

    Supports the affine-space arithmetic the flow needs (+, -, scalar *).
    The coefficient array is owned by the instance and never mutated.
    """

    __slots__ = ("mesh", "target", "coeffs")

    def __init__(self, mesh: TriangulatedSurface, target: TargetSpace, coeffs):
        coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
        if coeffs.shape != (mesh.num_facets, 2, target.dim):
            raise ValueError(
                f"coefficients must have shape {(mesh.num_facets, 2, target.dim)}, "
                f"got {coeffs.shape}"
            )
        self.mesh = mesh
        self.target = target
        self.coeffs = coeffs
        coeffs.setflags(write=False)

    @classmethod
    def zeros(cls, mesh, target):
        return cls(mesh, target, np.zeros((mesh.num_facets, 2, target.dim)))

    def _wrap(self, coeffs):
        return DiscreteOneForm(self.mesh, self.target, coeffs)

    def __add__(self, other):
        _check_compatible(self, other)
        return self._wrap(self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self._wrap(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self._wrap(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.coeffs)

    def facet_norm_sq(self):
        """Pointwise squared norm |F_sigma|^2 per facet."""
        return np.einsum("fij,fij->f", self.coeffs, self.coeffs)

    def __repr__(self):
        return (
            f"DiscreteOneForm(facets={self.mesh.num_facets}, m={self.target.m}, "
            f"norm={norm(self):.6g})"
        )


class MomentDensity:
    """Per-facet real density against the facet area form (a gauge Lie-algebra element)."""

    __slots__ = ("mesh", "values")

    def __init__(self, mesh: TriangulatedSurface, values):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != (mesh.num_facets,):
            raise ValueError(f"density must have shape ({mesh.num_facets},)")
        self.mesh = mesh
        self.values = values
        values.setflags(write=False)

    def max_abs(self):
        return float(np.abs(self.values).max(initial=0.0))

    def __repr__(self):
        return f"MomentDensity(facets={self.mesh.num_facets}, max|mu|={self.max_abs():.6g})"


def _check_compatible(F, H):
    if F.mesh is not H.mesh:
        raise ValueError("forms live on different meshes")
    if F.target != H.target:
        raise ValueError("forms have different target spaces")


def inner_product(F: DiscreteOneForm, H: DiscreteOneForm) -> float:
    """Area-weighted L2 inner product sum_f area_f <F_f, H_f>."""
    _check_compatible(F, H)
    return kernels.weighted_dot(F.coeffs, H.coeffs, F.mesh.facet_area)


def norm(F: DiscreteOneForm) -> float:
    """L2 norm induced by :func:`inner_product`."""
    return float(np.sqrt(kernels.weighted_norm_sq(F.coeffs, F.mesh.facet_area)))


def mult_i(F: DiscreteOneForm) -> DiscreteOneForm:
    """Multiply target values by i."""
    return F._wrap(kernels.mult_i(F.coeffs))


def rotate_form(F: DiscreteOneForm) -> DiscreteOneForm:
    """Almost complex structure induced by the facet quarter-turn (minus-composition)."""
    return F._wrap(kernels.rotate_form(F.coeffs))


def apply_R(F: DiscreteOneForm) -> DiscreteOneForm:
    """Linear isometric involution mult_i . rotate_form; fixes complex-linear forms."""
    return F._wrap(kernels.pm_involution(F.coeffs))


def split_pm(F: DiscreteOneForm):
    """Orthogonal splitting F = F_plus + F_minus into the involution eigenspaces."""
    r = kernels.pm_involution(F.coeffs)
    plus = 0.5 * (F.coeffs + r)
    minus = 0.5 * (F.coeffs - r)
    return F._wrap(plus), F._wrap(minus)


def _complex_mult(lam, coeffs):
    """Multiply each facet block by a complex scalar, lam broadcast over facets."""
    lam = np.asarray(lam, dtype=np.complex128)
    re = np.real(lam).reshape(-1, 1, 1)
    im = np.imag(lam).reshape(-1, 1, 1)
    return re * coeffs + im * kernels.mult_i(coeffs)


def gauge_act(lam, F: DiscreteOneForm) -> DiscreteOneForm:
    """Gauge action conj(lam)^{-1} F_plus + lam F_minus of per-facet nonzero scalars.

    ``lam`` may be a scalar or an array of per-facet complex numbers; unit
    scalars act by plain complex multiplication.
    """
    lam = np.broadcast_to(np.asarray(lam, dtype=np.complex128), (F.mesh.num_facets,))
    if np.any(lam == 0):
        raise ValueError("gauge scalars must be nonzero")
    plus, minus = split_pm(F)
    out = _complex_mult(1.0 / np.conj(lam), plus.coeffs) + _complex_mult(lam, minus.coeffs)
    return F._wrap(out)


def kahler_form(Fdot1: DiscreteOneForm, Fdot2: DiscreteOneForm) -> float:
    """Kähler 2-form <rotate_form(X), Y> on the space of forms; antisymmetric."""
    _check_compatible(Fdot1, Fdot2)
    return kernels.weighted_dot(
        kernels.rotate_form(Fdot1.coeffs), Fdot2.coeffs, Fdot1.mesh.facet_area
    )


def infinitesimal_action(zeta, F: DiscreteOneForm) -> DiscreteOneForm:
    """Velocity of the unit-gauge action generated by a real density: i * zeta * F."""
    values = zeta.values if isinstance(zeta, MomentDensity) else np.asarray(zeta, dtype=float)
    values = np.broadcast_to(values, (F.mesh.num_facets,))
    return F._wrap(values[:, None, None] * kernels.mult_i(F.coeffs))


def pullback_density(F: DiscreteOneForm) -> MomentDensity:
    """Pullback of the target symplectic form against the facet area form.

    Per facet this is omega_V(F(e1), F(e2)), the sum over complex lines of the
    2x2 determinants of the coefficient block.  Serves as the brute-force
    oracle for the moment map (which equals its negative).
    """
    c = F.coeffs
    det = c[:, 0, 0::2] * c[:, 1, 1::2] - c[:, 0, 1::2] * c[:, 1, 0::2]
    return MomentDensity(F.mesh, det.sum(axis=1))


def random_form(mesh, target, amplitude=1.0, seed=None, rng=None) -> DiscreteOneForm:
    """Deterministic random form with coefficients uniform in [-amplitude, amplitude]."""
    if rng is None:
        rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-amplitude, amplitude, size=(mesh.num_facets, 2, target.dim))
    return DiscreteOneForm(mesh, target, coeffs)
