"""Adaptive solve-estimate-mark-refine loop, rate measurement and
reference eigenvalues by extrapolation.

Each level solves the discrete eigenproblem for the configured window plus
a buffer, evaluates the residual estimator over the window, marks a minimal
bulk set and bisects.  The trace records one row per level; in
deterministic mode wall times are written as zero so that two runs produce
byte-identical files.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import assembly, eigen, estimator
from .mesh import Triangulation, preset_mesh, refine_nvb, uniform_refine
from .space import MorleySpace, build_space, hessians, prolong_to_fine

__all__ = [
    "AfemConfig",
    "AfemLevel",
    "AfemTrace",
    "ConfigError",
    "run_afem",
    "uniform_trace",
    "convergence_rate",
    "fit_rate",
    "richardson_extrapolate",
    "ReferenceResult",
    "reference_eigenvalues",
    "angle_to_reference",
]


class ConfigError(Exception):
    """Invalid adaptive-loop configuration."""


@dataclass
class AfemConfig:
    """Configuration of the adaptive loop.

    ``n`` and ``cluster_size`` fix the eigenvalue window ``n+1 .. n+N``;
    ``buffer`` extra eigenvalues are computed for separation diagnostics.
    """

    geometry: str = "square"
    bc: object = "clamped"
    n: int = 0
    cluster_size: int = 1
    theta: float = 0.5
    max_levels: int = 12
    max_ndof: int = 20000
    buffer: int = 4
    lower_bound_constant: float = 1.0
    eta2_floor: float = 1e-12
    deterministic: bool = False
    dense_cutoff: int = 900
    edge_weight: str = "h_T"
    mesh_file: object = None

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError("theta must lie in (0, 1]")
        if self.cluster_size < 1:
            raise ConfigError("cluster size N must be >= 1")
        if self.n < 0:
            raise ConfigError("window offset n must be >= 0")
        if self.buffer < 2:
            raise ConfigError("buffer must be >= 2 for separation diagnostics")
        if self.max_levels < 0 or self.max_ndof < 1:
            raise ConfigError("nonpositive stopping parameters")
        if self.lower_bound_constant < 0:
            raise ConfigError("lower-bound constant must be >= 0")

    @classmethod
    def from_dict(cls, doc: dict, strict: bool = True) -> "AfemConfig":
        """Build a config from a JSON document, applying defaults.

        The window may be given as ``{"J": {"n": .., "N": ..}}``.  Unknown
        keys raise in strict mode.
        """
        doc = dict(doc)
        j = doc.pop("J", None)
        if j is not None:
            doc["n"] = j.get("n", 0)
            doc["cluster_size"] = j.get("N", 1)
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown and strict:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: v for k, v in doc.items() if k in known}
        return cls(**kwargs)

    def window_indices(self):
        return np.arange(self.n + 1, self.n + self.cluster_size + 1)

    def initial_mesh(self) -> Triangulation:
        if self.mesh_file:
            from .mesh import load_mesh
            return load_mesh(self.mesh_file)
        return preset_mesh(self.geometry, self.bc)


@dataclass
class AfemLevel:
    """One row of the adaptive trace."""

    level: int
    ndof: int
    num_triangles: int
    h_max: float
    eigenvalues: np.ndarray
    lower_bounds: np.ndarray
    eta2_total: float
    marked: int
    m_j: float
    wall_time: float
    sin_angle: float = float("nan")


@dataclass
class AfemTrace:
    """Per-level records plus the meshes and window solutions of the run."""

    config: AfemConfig
    levels: list = field(default_factory=list)
    meshes: list = field(default_factory=list)
    clusters: list = field(default_factory=list)
    converged: bool = False

    @property
    def ndofs(self):
        return np.array([r.ndof for r in self.levels])

    def column(self, name):
        return np.array([getattr(r, name) for r in self.levels])

    def eigenvalue_matrix(self):
        return np.array([r.eigenvalues for r in self.levels])

    def csv_header(self):
        js = self.config.window_indices()
        cols = ["level", "ndof", "num_triangles", "h_max", "eta2_total",
                "marked", "m_j", "wall_time_s"]
        cols += [f"lambda_{j}" for j in js]
        cols += [f"lower_bound_{j}" for j in js]
        cols += ["sin_angle_ref"]
        return ",".join(cols)

    def to_csv(self, path):
        det = self.config.deterministic
        with open(path, "w") as fh:
            fh.write(self.csv_header() + "\n")
            for r in self.levels:
                wall = 0.0 if det else r.wall_time
                row = [str(r.level), str(r.ndof), str(r.num_triangles),
                       repr(r.h_max), repr(r.eta2_total), str(r.marked),
                       repr(r.m_j), repr(wall)]
                row += [repr(float(v)) for v in r.eigenvalues]
                row += [repr(float(v)) for v in r.lower_bounds]
                row += [repr(float(r.sin_angle))]
                fh.write(",".join(row) + "\n")


def read_trace_csv(path):
    """Columns of a trace CSV as a dict of float arrays."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(v) for v in row] for row in rows])
    return {name: data[:, k] for k, name in enumerate(header)}


def _solve_level(space, config, reference=None):
    t0 = time.perf_counter()
    A = assembly.assemble_stiffness(space)
    M = assembly.assemble_mass(space)
    want = config.n + config.cluster_size + config.buffer
    count = min(want, space.ndof)
    if count < config.n + config.cluster_size:
        raise eigen.EigenError(
            f"space too small: ndof={space.ndof} cannot host the window")
    sol = eigen.solve_gevp(A, M, count, dense_cutoff=config.dense_cutoff,
                           deterministic=True)
    if sol.eigenvalues[0] <= 0:
        raise eigen.EigenError(
            "nonpositive plate eigenvalue: check the boundary conditions")
    cluster = sol.window(config.n, config.cluster_size)
    rep = eigen.separation(sol.computed_spectrum, config.window_indices())
    fld = estimator.estimate(space, cluster, edge_weight=config.edge_weight)
    sin_angle = float("nan")
    if reference is not None:
        sin_angle = angle_to_reference(space, cluster, *reference)
    wall = time.perf_counter() - t0
    return cluster, rep, fld, sin_angle, wall


def _record(level, space, cluster, rep, fld, sin_angle, wall, config, marked):
    lam = cluster.eigenvalues
    lows = np.array([eigen.lower_bound(v, space.mesh.h_max,
                                       config.lower_bound_constant)
                     for v in lam])
    return AfemLevel(
        level=level, ndof=space.ndof, num_triangles=space.mesh.num_triangles,
        h_max=space.mesh.h_max, eigenvalues=lam.copy(), lower_bounds=lows,
        eta2_total=fld.total, marked=marked, m_j=rep.m_j, wall_time=wall,
        sin_angle=sin_angle)


def run_afem(config: AfemConfig, reference=None) -> AfemTrace:
    """Run the adaptive loop until a stopping criterion fires.

    ``reference`` is an optional pair (fine_space, fine_cluster) against
    which the subspace angle of each level's window is recorded.  Raises
    ClusterSplitError when the configured window cuts a numerically multiple
    eigenvalue.
    """
    mesh = config.initial_mesh()
    trace = AfemTrace(config=config)
    level = 0
    while True:
        space = build_space(mesh)
        cluster, rep, fld, sin_angle, wall = _solve_level(space, config, reference)
        marked = estimator.dorfler_mark(fld, config.theta)
        trace.levels.append(_record(level, space, cluster, rep, fld, sin_angle,
                                    wall, config, len(marked)))
        trace.meshes.append(mesh)
        trace.clusters.append(cluster)
        if level >= config.max_levels:
            break
        if space.ndof >= config.max_ndof:
            break
        if fld.total <= config.eta2_floor or marked.converged:
            trace.converged = True
            break
        mesh = refine_nvb(mesh, marked)
        level += 1
    return trace


def uniform_trace(config: AfemConfig) -> AfemTrace:
    """Uniform-refinement counterpart of ``run_afem`` with the same records."""
    mesh = config.initial_mesh()
    trace = AfemTrace(config=config)
    level = 0
    while True:
        space = build_space(mesh)
        cluster, rep, fld, sin_angle, wall = _solve_level(space, config)
        trace.levels.append(_record(level, space, cluster, rep, fld, sin_angle,
                                    wall, config, space.mesh.num_triangles))
        trace.meshes.append(mesh)
        trace.clusters.append(cluster)
        if level >= config.max_levels or space.ndof >= config.max_ndof:
            break
        mesh = uniform_refine(mesh)
        level += 1
    return trace


# -- rates and references --------------------------------------------------


def fit_rate(ndofs, values, ndof0=None, tail=None):
    """Least-squares slope of log(values) against log(ndof - ndof0 + 1).

    Uses the last half of the levels unless ``tail`` is given.
    """
    ndofs = np.asarray(ndofs, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ndofs) < 4:
        raise ValueError("need at least 4 levels to fit a rate")
    if np.any(values <= 0):
        raise ValueError("rate fit requires positive values")
    ndof0 = ndofs[0] if ndof0 is None else ndof0
    k = len(ndofs) - (tail if tail is not None else len(ndofs) // 2)
    x = np.log(ndofs[k:] - ndof0 + 1.0)
    y = np.log(values[k:])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def convergence_rate(trace: AfemTrace, quantity, reference=None, tail=None):
    """Empirical rate of a trace quantity against degrees of freedom.

    ``quantity`` is ``"eta2"`` or ``"lambda_err"``; the latter needs a
    reference eigenvalue array (or scalar for a single-member window).
    """
    ndofs = trace.ndofs
    if quantity == "eta2":
        vals = trace.column("eta2_total")
    elif quantity == "lambda_err":
        if reference is None:
            raise ValueError("lambda_err needs a reference eigenvalue")
        lam = trace.eigenvalue_matrix()
        ref = np.broadcast_to(np.asarray(reference, dtype=float), lam.shape[1:])
        vals = np.abs(lam - ref).max(axis=1)
    else:
        raise ValueError(f"unknown quantity {quantity!r}")
    return fit_rate(ndofs, vals, tail=tail)


def richardson_extrapolate(values):
    """Limit estimate from the last three terms of an algebraically
    convergent sequence, with observed ratio and uncertainty.

    Returns (limit, observed_ratio, uncertainty, reliable).  The sequence of
    differences must be monotone in sign and decreasing, otherwise the
    extrapolation is flagged unreliable.
    """
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        raise ValueError("need at least three terms")
    d1 = v[-2] - v[-3]
    d2 = v[-1] - v[-2]
    reliable = d1 * d2 > 0 and abs(d2) < abs(d1)
    if not reliable:
        return float(v[-1]), float("nan"), float("inf"), False
    r = d1 / d2
    limit = v[-1] + d2 / (r - 1.0)
    if len(v) >= 4:
        d0 = v[-3] - v[-4]
        if d0 * d1 > 0 and abs(d1) < abs(d0):
            prev = v[-2] + d1 / (d0 / d1 - 1.0)
            unc = abs(limit - prev)
        else:
            unc = abs(limit - v[-1])
    else:
        unc = abs(limit - v[-1])
    return float(limit), float(r), float(unc), True


@dataclass
class ReferenceResult:
    """Uniform-refinement eigenvalue sequences with extrapolated limits."""

    indices: np.ndarray
    ndofs: np.ndarray
    values: np.ndarray          # (levels, window)
    limits: np.ndarray
    ratios: np.ndarray
    uncertainties: np.ndarray
    reliable: np.ndarray


def reference_eigenvalues(geometry, bc, J, target_ndof,
                          dense_cutoff=900) -> ReferenceResult:
    """Uniform-refinement reference values for the window ``J``.

    Refines until ``target_ndof`` is reached, then extrapolates each window
    member.  ``J`` is an iterable of 1-based indices (contiguous).
    """
    J = np.asarray(sorted(J), dtype=int)
    n, N = int(J[0] - 1), len(J)
    config = AfemConfig(geometry=geometry, bc=bc, n=n, cluster_size=N,
                        max_levels=64, max_ndof=int(target_ndof),
                        dense_cutoff=dense_cutoff)
    trace = uniform_trace(config)
    lam = trace.eigenvalue_matrix()
    limits, ratios, uncs, ok = [], [], [], []
    for k in range(lam.shape[1]):
        lim, r, unc, rel = richardson_extrapolate(lam[:, k])
        limits.append(lim)
        ratios.append(r)
        uncs.append(unc)
        ok.append(rel)
    return ReferenceResult(indices=J, ndofs=trace.ndofs, values=lam,
                           limits=np.array(limits), ratios=np.array(ratios),
                           uncertainties=np.array(uncs),
                           reliable=np.array(ok, dtype=bool))


def angle_to_reference(space: MorleySpace, cluster,
                       ref_space: MorleySpace, ref_cluster) -> float:
    """Largest-angle sine between a level's window span and a reference span.

    Both coefficient blocks are prolonged to the reference mesh (which must
    refine the level mesh) and compared in the broken-Hessian product.
    """
    if cluster.vectors.shape[1] != ref_cluster.vectors.shape[1]:
        raise eigen.EigenError("window dimensions differ")
    fine = ref_space.mesh
    FX = _hessian_feature_block(space, cluster.vectors, fine)
    FY = _hessian_feature_block(ref_space, ref_cluster.vectors, fine)
    return eigen.sin_max_angle(FX, FY)


def _hessian_feature_block(space, vectors, fine_mesh):
    w = np.sqrt(fine_mesh.areas)
    scale = np.stack([w, w, np.sqrt(2.0) * w], axis=1)     # (T, 3)
    cols = []
    for k in range(vectors.shape[1]):
        bf = prolong_to_fine(vectors[:, k], fine_mesh, space=space)
        cols.append((hessians(bf) * scale).ravel())
    return np.stack(cols, axis=1)
