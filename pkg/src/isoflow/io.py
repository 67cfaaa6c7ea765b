"""Initial conditions, tabular file formats, and OBJ export.

All writers are deterministic given identical inputs.  Text tables are
whitespace-separated with ``#`` comment headers; the binary coefficient layout
is a fixed 24-byte header followed by the raw float64 block.  Formats:

* form coefficients (text):  ``facet i j value`` rows (1-based i, j)
* form coefficients (binary): magic ``ISOFORM1`` + uint64 nf + uint32 m +
  uint32 reserved, then the (nf, 2, 2m) block row-major little-endian
* vertex map table:          ``vertex x1 ... x_{2m}`` rows
* moment density table:      ``facet mu`` rows
* flow diagnostics:          header ``step t phi l2norm h grad_norm
  soliton_residual``, one row per recorded step
* OBJ: vertices projected to R^3, faces from the facet table
"""

from __future__ import annotations

import struct

import numpy as np

from .exact import ExactProjector, PolyMap
from .flow import FlowTrace, TraceRecord
from .forms import DiscreteOneForm, MomentDensity, TargetSpace
from .mesh import TriangulatedSurface

FORM_MAGIC = b"ISOFORM1"


# --- initial conditions ---------------------------------------------------------


def clifford_sample(mesh: TriangulatedSurface, r: float, target: TargetSpace | None = None
                    ) -> PolyMap:
    """Sample the radius-r product torus in C^2 at the vertices of a quotient torus.

    Vertex lattice coordinates (theta1, theta2) in [0, 1) come from solving
    position = theta1 * gamma1 + theta2 * gamma2; the map sends them to
    r * (cos 2 pi theta1, sin 2 pi theta1, cos 2 pi theta2, sin 2 pi theta2),
    which is lattice-periodic and hence single-valued on the quotient.  The
    smooth map pulls the target symplectic form back to zero, so its sampled
    differential has small energy that shrinks under refinement.
    """
    if target is None:
        target = TargetSpace(2)
    if target.m != 2:
        raise ValueError("the product-torus sample needs a C^2 target")
    if mesh.lattice is None:
        raise ValueError("clifford sampling needs a quotient-torus mesh")
    theta = np.linalg.solve(mesh.lattice.basis, mesh.vertices.T).T
    angles = 2.0 * np.pi * theta
    points = r * np.column_stack([
        np.cos(angles[:, 0]), np.sin(angles[:, 0]),
        np.cos(angles[:, 1]), np.sin(angles[:, 1]),
    ])
    return PolyMap(mesh, target, points)


def random_exact(P: ExactProjector, seed, amplitude) -> DiscreteOneForm:
    """Seeded random combination of hat differentials; exact by construction.

    Coefficients are uniform in [-amplitude, amplitude], one per (vertex,
    target index); the same seed reproduces the output bit for bit.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-amplitude, amplitude,
                          size=(P.mesh.num_vertices, P.target.dim))
    coeffs = (P.diff_op @ weights).reshape(P.mesh.num_facets, 2, P.target.dim)
    return DiscreteOneForm(P.mesh, P.target, coeffs)


# --- OBJ export -----------------------------------------------------------------


def projection_matrix(projection, dim):
    """Normalize a projection spec to a (3, dim) matrix.

    Accepts a sequence of three 0-based coordinate indices or a full (3, dim)
    matrix with independent rows.
    """
    arr = np.asarray(projection, dtype=float)
    if arr.shape == (3,):
        idx = arr.astype(int)
        if not np.array_equal(idx, arr) or len(set(idx.tolist())) != 3:
            raise ValueError("index projection needs three distinct integers")
        if idx.min() < 0 or idx.max() >= dim:
            raise ValueError(f"projection index out of range for dimension {dim}")
        mat = np.zeros((3, dim))
        mat[np.arange(3), idx] = 1.0
        return mat
    if arr.shape == (3, dim):
        if np.linalg.matrix_rank(arr) != 3:
            raise ValueError("projection matrix rows must be independent")
        return arr
    raise ValueError(f"projection must be 3 indices or a (3, {dim}) matrix")


def export_obj(f: PolyMap, path, projection=(0, 1, 2)):
    """Write a Wavefront OBJ of the map; vertices projected to R^3 by ``projection``."""
    mat = projection_matrix(projection, f.target.dim)
    pts = f.points @ mat.T
    lines = [f"# isoflow map export: {f.mesh.num_vertices} vertices, "
             f"{f.mesh.num_facets} faces"]
    for x, y, z in pts:
        lines.append(f"v {x:.17g} {y:.17g} {z:.17g}")
    for tri in f.mesh.facets:
        lines.append(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_obj_vertices(path):
    """Parse back the vertex block of an OBJ file, (n, 3) floats."""
    pts = []
    with open(path) as fh:
        for line in fh:
            tok = line.split()
            if tok and tok[0] == "v":
                pts.append([float(x) for x in tok[1:4]])
    return np.asarray(pts)


# --- form coefficients ------------------------------------------------------------


def write_form_text(F: DiscreteOneForm, path):
    """Tabular coefficient export: one ``facet i j value`` row per entry."""
    lines = ["# isoflow form coefficients: facet i j value",
             f"# facets {F.mesh.num_facets} m {F.target.m}"]
    for f in range(F.mesh.num_facets):
        for i in range(2):
            for j in range(F.target.dim):
                lines.append(f"{f} {i + 1} {j + 1} {F.coeffs[f, i, j]:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_form_text(path, mesh: TriangulatedSurface, target: TargetSpace) -> DiscreteOneForm:
    coeffs = np.zeros((mesh.num_facets, 2, target.dim))
    seen = np.zeros(coeffs.shape, dtype=bool)
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            f, i, j, value = line.split()
            idx = (int(f), int(i) - 1, int(j) - 1)
            coeffs[idx] = float(value)
            seen[idx] = True
    if not seen.all():
        raise ValueError(f"{path}: missing coefficient rows")
    return DiscreteOneForm(mesh, target, coeffs)


def write_form_binary(F: DiscreteOneForm, path):
    """Raw binary coefficient export (documented header + row-major float64)."""
    header = FORM_MAGIC + struct.pack("<QII", F.mesh.num_facets, F.target.m, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(F.coeffs, dtype="<f8").tobytes())


def read_form_binary(path, mesh: TriangulatedSurface, target: TargetSpace) -> DiscreteOneForm:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != FORM_MAGIC:
            raise ValueError(f"{path}: not an isoflow binary form file")
        nf, m, _ = struct.unpack("<QII", fh.read(16))
        if nf != mesh.num_facets or m != target.m:
            raise ValueError(
                f"{path}: shape mismatch (file has {nf} facets, m={m})"
            )
        data = np.frombuffer(fh.read(), dtype="<f8")
    return DiscreteOneForm(mesh, target, data.reshape(nf, 2, 2 * m).copy())


# --- vertex maps and densities -----------------------------------------------------


def write_map(f: PolyMap, path):
    """Vertex map table: ``vertex x1 ... x_{2m}`` rows."""
    lines = [f"# isoflow map: vertex x1..x{f.target.dim}"]
    for v, row in enumerate(f.points):
        lines.append(f"{v} " + " ".join(f"{x:.17g}" for x in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_map(path, mesh: TriangulatedSurface, target: TargetSpace) -> PolyMap:
    points = np.zeros((mesh.num_vertices, target.dim))
    seen = np.zeros(mesh.num_vertices, dtype=bool)
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            v = int(tok[0])
            if len(tok) != target.dim + 1:
                raise ValueError(f"{path}: vertex {v}: expected {target.dim} coordinates")
            points[v] = [float(x) for x in tok[1:]]
            seen[v] = True
    if not seen.all():
        raise ValueError(f"{path}: missing vertex rows")
    return PolyMap(mesh, target, points)


def write_moment_density(mu: MomentDensity, path):
    """Per-facet density table ``facet mu`` for external heatmap inspection."""
    lines = ["# isoflow moment density: facet mu"]
    for f, value in enumerate(mu.values):
        lines.append(f"{f} {value:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# --- flow diagnostics ---------------------------------------------------------------

TRACE_COLUMNS = ("step", "t", "phi", "l2norm", "h", "grad_norm", "soliton_residual")


def write_trace(trace: FlowTrace, path):
    """Append-friendly diagnostics table with the documented column header."""
    lines = [" ".join(TRACE_COLUMNS)]
    for r in trace:
        lines.append(
            f"{r.step} {r.t:.17g} {r.phi:.17g} {r.l2norm:.17g} "
            f"{r.h:.17g} {r.grad_norm:.17g} {r.soliton_residual:.17g}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace(path) -> FlowTrace:
    trace = FlowTrace()
    with open(path) as fh:
        header = fh.readline().split()
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected diagnostics header")
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            trace.append(TraceRecord(
                step=int(tok[0]), t=float(tok[1]), phi=float(tok[2]),
                l2norm=float(tok[3]), h=float(tok[4]), grad_norm=float(tok[5]),
                soliton_residual=float(tok[6]),
            ))
    return trace
