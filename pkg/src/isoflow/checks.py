"""Runtime invariant suite behind ``isoflow check``.

A condensed, self-contained version of the property tests: random-instance
identities for the operator algebra, the moment map, the projector and a
short flow run.  Each check returns a named pass/fail record so the CLI can
print one line per check and exit nonzero on any failure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exact, flow, forms, io, mesh as mesh_mod, moment


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        suffix = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name}{suffix}"


def run_checks(surface, target=None, seed=0, trials=20):
    """Run the invariant suite on one mesh; returns a list of CheckResult."""
    if target is None:
        target = forms.TargetSpace(2)
    rng = np.random.default_rng(seed)
    results = []

    def add(name, err, tol):
        results.append(CheckResult(name, bool(err <= tol), f"err={err:.2e} tol={tol:.0e}"))

    violations = mesh_mod.validate_mesh(surface)
    results.append(CheckResult(
        "mesh invariants", not violations,
        violations[0] if violations else f"V={surface.num_vertices} E={surface.num_edges} "
                                         f"F={surface.num_facets}"
    ))

    P = exact.ExactProjector(surface, target)
    err_alg = err_iso = err_gauge = err_scaling = err_oracle = err_ham = 0.0
    err_grad = err_mu_inv = 0.0
    for _ in range(trials):
        F = forms.random_form(surface, target, rng=rng)
        H = forms.random_form(surface, target, rng=rng)

        RR = forms.apply_R(forms.apply_R(F))
        JJ = forms.rotate_form(forms.rotate_form(F))
        II = forms.mult_i(forms.mult_i(F))
        IJ = forms.mult_i(forms.rotate_form(F)) - forms.rotate_form(forms.mult_i(F))
        err_alg = max(err_alg,
                      np.abs(RR.coeffs - F.coeffs).max(),
                      np.abs(JJ.coeffs + F.coeffs).max(),
                      np.abs(II.coeffs + F.coeffs).max(),
                      np.abs(IJ.coeffs).max())
        err_iso = max(err_iso, abs(forms.inner_product(forms.apply_R(F), forms.apply_R(H))
                                   - forms.inner_product(F, H)))

        lam = np.exp(1j * rng.uniform(0, 2 * np.pi, surface.num_facets))
        err_gauge = max(err_gauge, abs(forms.norm(forms.gauge_act(lam, F)) - forms.norm(F)))
        err_mu_inv = max(err_mu_inv, np.abs(
            moment.moment_map(forms.gauge_act(lam, F)).values - moment.moment_map(F).values
        ).max())

        s = float(rng.uniform(0.5, 2.0))
        plus, minus = forms.split_pm(F)
        predicted = -0.5 * (s**-2 * plus.facet_norm_sq() - s**2 * minus.facet_norm_sq())
        err_scaling = max(err_scaling, np.abs(
            moment.moment_map(forms.gauge_act(s, F)).values - predicted).max())

        err_oracle = max(err_oracle, np.abs(
            moment.moment_map(F).values + forms.pullback_density(F).values).max())

        zeta = forms.MomentDensity(surface, rng.uniform(-1, 1, surface.num_facets))
        eps = 1e-5
        dmu = (moment.moment_map(F + eps * H).values
               - moment.moment_map(F - eps * H).values) / (2 * eps)
        lhs = float(np.sum(surface.facet_area * dmu * zeta.values))
        rhs = -forms.kahler_form(forms.infinitesimal_action(zeta, F), H)
        err_ham = max(err_ham, abs(lhs - rhs) / max(abs(rhs), 1e-12))

        phi = moment.energy(F)
        err_grad = max(err_grad, abs(forms.inner_product(moment.gradient(F), F) - 4 * phi)
                       / max(4 * phi, 1e-12))

    add("operator algebra (involution, squares, commutation)", err_alg, 1e-14)
    add("operators are isometries", err_iso, 1e-12)
    add("unit gauge preserves the norm", err_gauge, 1e-12)
    add("unit gauge preserves the moment density", err_mu_inv, 1e-12)
    add("real-scaling law of the moment density", err_scaling, 1e-12)
    add("moment density equals minus the pullback density", err_oracle, 1e-13)
    add("hamiltonian pairing identity (central differences)", err_ham, 1e-6)
    add("<gradient, F> = 4 phi", err_grad, 1e-12)

    L = P.stiffness
    add("stiffness row sums vanish", float(np.abs(np.asarray(L.sum(axis=1))).max()), 1e-12)

    F = forms.random_form(surface, target, rng=rng)
    PF = P.project(F)
    add("projector idempotent", forms.norm(P.project(PF) - PF) / max(forms.norm(PF), 1e-12),
        1e-10)
    H = forms.random_form(surface, target, rng=rng)
    add("projector self-adjoint",
        abs(forms.inner_product(PF, H) - forms.inner_product(F, P.project(H)))
        / max(abs(forms.inner_product(PF, H)), 1e-12), 1e-10)
    Fex = io.random_exact(P, int(rng.integers(1 << 30)), 1.0)
    add("projector fixes exact forms", forms.norm(P.project(Fex) - Fex) / forms.norm(Fex), 1e-10)
    add("random exact forms are exact",
        exact.exactness_residual(Fex) / forms.norm(Fex), 1e-12)

    cfg = flow.FlowConfig(h0=0.01, max_steps=50, trace_stride=1)
    result = flow.run_flow(P, Fex, cfg)
    phis = result.trace.column("phi")
    results.append(CheckResult(
        "flow energy monotone over 50 steps", bool(np.all(np.diff(phis) <= 0)),
        f"phi {phis[0]:.3e} -> {phis[-1]:.3e}"
    ))
    add("flow iterates stay exact",
        exact.exactness_residual(result.final) / max(forms.norm(result.final), 1e-12), 1e-8)

    return results
