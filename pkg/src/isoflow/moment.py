"""Moment map, energy and gradients.

The moment map assigns to a form the per-facet density -<involution(F), F>/2,
which equals minus the pullback of the target symplectic form against the
facet area form; it vanishes exactly on isotropic forms.  The energy is half
its squared L2 norm (quartic in the form), with gradient -mu * involution(F)
facetwise and restricted gradient obtained by projecting onto exact forms.
"""

from __future__ import annotations

import numpy as np

from . import _core as kernels
from .exact import ExactProjector
from .forms import DiscreteOneForm, MomentDensity


def moment_map(F: DiscreteOneForm) -> MomentDensity:
    """Per-facet symplectic density; zero exactly on isotropic forms."""
    return MomentDensity(F.mesh, kernels.moment_density(F.coeffs))


def energy(F: DiscreteOneForm) -> float:
    """Half the squared L2 norm of the moment density; nonnegative, quartic."""
    mu = kernels.moment_density(F.coeffs)
    return kernels.energy_from_density(mu, F.mesh.facet_area)


def energy_of_density(mu: MomentDensity) -> float:
    """Energy evaluated from a precomputed moment density."""
    return kernels.energy_from_density(mu.values, mu.mesh.facet_area)


def gradient(F: DiscreteOneForm) -> DiscreteOneForm:
    """Unrestricted energy gradient -mu * involution(F), facetwise."""
    mu = kernels.moment_density(F.coeffs)
    return DiscreteOneForm(F.mesh, F.target, kernels.gradient_coeffs(F.coeffs, mu))


def restricted_gradient(P: ExactProjector, F: DiscreteOneForm) -> DiscreteOneForm:
    """Gradient of the energy restricted to exact forms: project(gradient(F)).

    The caller is responsible for ``F`` being exact; the output always is.
    """
    return P.project(gradient(F))


def evaluate_state(P: ExactProjector, F: DiscreteOneForm):
    """(phi, restricted gradient, |gradient|, |F|) in one pass; the flow's hot path."""
    areas = F.mesh.facet_area
    mu = kernels.moment_density(F.coeffs)
    phi = kernels.energy_from_density(mu, areas)
    grad = DiscreteOneForm(F.mesh, F.target, kernels.gradient_coeffs(F.coeffs, mu))
    g = P.project(grad)
    gnorm = float(np.sqrt(kernels.weighted_norm_sq(g.coeffs, areas)))
    fnorm = float(np.sqrt(kernels.weighted_norm_sq(F.coeffs, areas)))
    return phi, g, gnorm, fnorm
