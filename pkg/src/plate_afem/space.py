"""Morley finite element space: DOF tables, local bases, interpolation.

Degrees of freedom are point values at the vertices and mean normal
derivatives over the edges, signed by each edge's fixed global normal.
Vertex DOFs are eliminated on the closure of the clamped and simply
supported boundary parts, edge DOFs on clamped edges.

Element polynomials are stored on a per-triangle monomial frame centred at
the centroid, ``[1, dx, dy, dx^2, dx*dy, dy^2]``, so the (constant) Hessian
can be read off the coefficients and survives restriction to children
bitwise.
"""

import json

import numpy as np

from .mesh import BoundaryPart, Triangulation, ancestor_map

__all__ = [
    "MorleySpace",
    "BrokenFunction",
    "SpaceError",
    "build_space",
    "dof_functional",
    "morley_interpolate",
    "evaluate_broken",
    "prolong_to_fine",
    "broken_from_coeffs",
    "hessians",
    "poly_shift",
    "save_coefficients",
    "load_coefficients",
]

_DUALITY_TOL = 1e-12


class SpaceError(Exception):
    """DOF construction or evaluation failure."""


class BrokenFunction:
    """Piecewise quadratic on a triangulation, centroid-frame coefficients."""

    def __init__(self, mesh: Triangulation, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (mesh.num_triangles, 6):
            raise SpaceError("coefficient array must have shape (#T, 6)")
        self.mesh = mesh
        self.coeffs = coeffs

    def value(self, t, points):
        d = np.atleast_2d(points) - self.mesh.centroids[t]
        c = self.coeffs[t]
        return (c[0] + c[1] * d[:, 0] + c[2] * d[:, 1] + c[3] * d[:, 0] ** 2
                + c[4] * d[:, 0] * d[:, 1] + c[5] * d[:, 1] ** 2)

    def gradient(self, t, points):
        d = np.atleast_2d(points) - self.mesh.centroids[t]
        c = self.coeffs[t]
        gx = c[1] + 2.0 * c[3] * d[:, 0] + c[4] * d[:, 1]
        gy = c[2] + c[4] * d[:, 0] + 2.0 * c[5] * d[:, 1]
        return np.stack([gx, gy], axis=-1)

    def hessian(self, t):
        c = self.coeffs[t]
        return np.array([[2.0 * c[3], c[4]], [c[4], 2.0 * c[5]]])


def hessians(bf: BrokenFunction) -> np.ndarray:
    """Per-triangle Hessian components (h11, h22, h12) of a broken quadratic."""
    c = bf.coeffs
    return np.stack([2.0 * c[:, 3], 2.0 * c[:, 5], c[:, 4]], axis=1)


def poly_shift(coeffs, delta):
    """Re-centre quadratic coefficients: frames moved by ``delta`` (new - old)."""
    c = np.asarray(coeffs, dtype=float)
    dx, dy = np.moveaxis(np.asarray(delta, dtype=float), -1, 0)
    out = c.copy()
    out[..., 0] = (c[..., 0] + c[..., 1] * dx + c[..., 2] * dy
                   + c[..., 3] * dx ** 2 + c[..., 4] * dx * dy + c[..., 5] * dy ** 2)
    out[..., 1] = c[..., 1] + 2.0 * c[..., 3] * dx + c[..., 4] * dy
    out[..., 2] = c[..., 2] + c[..., 4] * dx + 2.0 * c[..., 5] * dy
    return out


_LAMBDA_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0))


class MorleySpace:
    """Morley space on a triangulation with boundary conditions eliminated.

    Attributes
    ----------
    vertex_dof, edge_dof : global DOF index per vertex/edge, -1 if constrained
    ndof : number of unconstrained DOFs
    cell_dofs : (T, 6) global DOF of the local DOFs (v0, v1, v2, e0, e1, e2),
        where e_i is the edge opposite vertex i
    basis : (T, 6, 6) local basis functions in the centroid monomial frame
    basis_hessians : (T, 6, 3) constant Hessian components (h11, h22, h12)
    duality_residual : max deviation of the local DOF/basis duality from
        the identity, checked against 1e-12 at build time
    """

    def __init__(self, mesh: Triangulation):
        self.mesh = mesh
        self._number_dofs()
        self._build_basis()

    def _number_dofs(self):
        mesh = self.mesh
        constrained_v = mesh.vertices_on(BoundaryPart.CLAMPED,
                                         BoundaryPart.SIMPLY_SUPPORTED)
        constrained_e = mesh.edge_tags == BoundaryPart.CLAMPED

        self.vertex_dof = np.full(mesh.num_vertices, -1, dtype=np.int64)
        free_v = np.nonzero(~constrained_v)[0]
        self.vertex_dof[free_v] = np.arange(len(free_v))
        self.edge_dof = np.full(mesh.num_edges, -1, dtype=np.int64)
        free_e = np.nonzero(~constrained_e)[0]
        self.edge_dof[free_e] = len(free_v) + np.arange(len(free_e))
        self.ndof = len(free_v) + len(free_e)
        self.num_vertex_dofs = len(free_v)

        self.cell_dofs = np.hstack([
            self.vertex_dof[mesh.triangles],
            self.edge_dof[mesh.tri_edges],
        ])

    def _build_basis(self):
        mesh = self.mesh
        p = mesh.vertices[mesh.triangles]            # (T, 3, 2)
        ones = np.ones((mesh.num_triangles, 3, 1))
        A = np.concatenate([ones, p], axis=2)        # rows (1, x, y) per vertex
        coef = np.linalg.inv(A)                      # columns: affine nodal functions
        grads = coef[:, 1:, :].transpose(0, 2, 1)    # (T, 3, 2) gradients of lambda_i

        # DOF matrix of the barycentric monomials lam_a * lam_b
        D = np.zeros((mesh.num_triangles, 6, 6))
        for l, (a, b) in enumerate(_LAMBDA_PAIRS):
            for j in range(3):
                D[:, j, l] = (1.0 if a == b == j else 0.0)
        normals = mesh.edge_normals[mesh.tri_edges]  # (T, 3, 2)
        lam_mid = np.full(3, 0.5)
        for i in range(3):                           # edge opposite vertex i
            lam = lam_mid.copy()
            lam[i] = 0.0
            for l, (a, b) in enumerate(_LAMBDA_PAIRS):
                grad = lam[a] * grads[:, b, :] + lam[b] * grads[:, a, :]
                D[:, 3 + i, l] = np.einsum("td,td->t", normals[:, i, :], grad)

        try:
            C = np.linalg.inv(D)
        except np.linalg.LinAlgError as exc:
            raise SpaceError("singular local dual system (degenerate triangle)") from exc
        resid = np.abs(np.einsum("tkl,tli->tki", D, C)
                       - np.eye(6)[None, :, :]).max()
        if resid > _DUALITY_TOL:
            raise SpaceError(f"local basis duality residual {resid:.3e} exceeds 1e-12")
        self.duality_residual = float(resid)

        # centroid-frame coefficients of the lambda monomials:
        # lam_a = 1/3 + g_a . d  =>  lam_a lam_b expands to a quadratic in d
        g = grads
        mono = np.zeros((mesh.num_triangles, 6, 6))
        for l, (a, b) in enumerate(_LAMBDA_PAIRS):
            mono[:, l, 0] = 1.0 / 9.0
            mono[:, l, 1] = (g[:, a, 0] + g[:, b, 0]) / 3.0
            mono[:, l, 2] = (g[:, a, 1] + g[:, b, 1]) / 3.0
            mono[:, l, 3] = g[:, a, 0] * g[:, b, 0]
            mono[:, l, 4] = g[:, a, 0] * g[:, b, 1] + g[:, a, 1] * g[:, b, 0]
            mono[:, l, 5] = g[:, a, 1] * g[:, b, 1]
        self.basis = np.einsum("tli,tlm->tim", C, mono)
        c = self.basis
        self.basis_hessians = np.stack(
            [2.0 * c[:, :, 3], 2.0 * c[:, :, 5], c[:, :, 4]], axis=2)

    # -- coefficient handling ---------------------------------------------

    def local_dof_values(self, u):
        """(T, 6) local DOF values of a global coefficient vector (0 where constrained)."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.ndof,):
            raise SpaceError(f"expected coefficient vector of length {self.ndof}")
        padded = np.concatenate([u, [0.0]])
        return padded[self.cell_dofs]

    def to_broken(self, u) -> BrokenFunction:
        """Represent a Morley coefficient vector as a broken quadratic."""
        vals = self.local_dof_values(u)
        coeffs = np.einsum("ti,tim->tm", vals, self.basis)
        return BrokenFunction(self.mesh, coeffs)

    def fingerprint(self) -> str:
        from .mesh import mesh_hash
        return mesh_hash(self.mesh)


def build_space(mesh: Triangulation) -> MorleySpace:
    """Build the Morley space with eliminated boundary constraints."""
    return MorleySpace(mesh)


def broken_from_coeffs(space: MorleySpace, u) -> BrokenFunction:
    return space.to_broken(u)


# -- DOF functionals -----------------------------------------------------------


def _edge_gauss(npts=3):
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def _callable_pair(v):
    if isinstance(v, tuple):
        return v
    if hasattr(v, "value") and hasattr(v, "gradient") and not isinstance(v, BrokenFunction):
        return v.value, v.gradient
    raise SpaceError("expected a BrokenFunction or a (value, gradient) pair")


def _vertex_value_broken(bf: BrokenFunction, z):
    # Morley functions are single valued at vertices; average adjacent
    # traces so generic broken inputs are treated symmetrically
    mesh = bf.mesh
    tris = np.nonzero((mesh.triangles == z).any(axis=1))[0]
    vals = [bf.value(t, mesh.vertices[z])[0] for t in tris]
    return float(np.mean(vals))


def _edge_mean_normal_derivative_callable(mesh, f_grad, edge):
    a = mesh.vertices[mesh.edges[edge, 0]]
    b = mesh.vertices[mesh.edges[edge, 1]]
    nu = mesh.edge_normals[edge]
    s, w = _edge_gauss()
    pts = a[None, :] * (1.0 - s)[:, None] + b[None, :] * s[:, None]
    grads = np.asarray([f_grad(p) for p in pts], dtype=float)
    return float(np.sum(w * (grads @ nu)))


def _subedges_on(mesh_fine, a, b, tol):
    """Fine edges that partition the segment [a, b], with their parameters."""
    d = b - a
    L2 = d @ d
    rel = mesh_fine.vertices - a
    cross = np.abs(d[0] * rel[:, 1] - d[1] * rel[:, 0]) / np.sqrt(L2)
    s = rel @ d / L2
    on = (cross <= tol) & (s >= -tol) & (s <= 1.0 + tol)
    verts = np.nonzero(on)[0]
    vset = set(int(z) for z in verts)
    keys = np.sort(mesh_fine.edges, axis=1)
    hits = [f for f, (i, j) in enumerate(keys)
            if int(i) in vset and int(j) in vset]
    return hits


def _edge_mean_normal_derivative_broken(space, bf, edge):
    coarse = space.mesh
    fine = bf.mesh
    a = coarse.vertices[coarse.edges[edge, 0]]
    b = coarse.vertices[coarse.edges[edge, 1]]
    nu = coarse.edge_normals[edge]
    if fine is coarse:
        sub = [edge]
    else:
        scale = max(np.max(np.abs(coarse.vertices)), 1.0)
        sub = _subedges_on(fine, a, b, 1e-12 * scale)
        if not sub:
            raise SpaceError("edge is not resolved by the fine mesh")
    total = 0.0
    for f in sub:
        mid = fine.edge_midpoints[f]
        # normal derivative is affine per side; the midpoint value is its
        # mean, averaged over the (at most two) one-sided traces
        tris = fine.edge_patch(f)
        dn = np.mean([bf.gradient(t, mid)[0] @ nu for t in tris])
        total += fine.edge_lengths[f] * dn
    return total / coarse.edge_lengths[edge]


def dof_functional(space: MorleySpace, dof: int, v) -> float:
    """Evaluate one global DOF functional on ``v``.

    Vertex DOFs return the point value; edge DOFs return the mean normal
    derivative along the edge with respect to its stored normal.  ``v`` is a
    BrokenFunction (on the same mesh or a refinement) or a
    ``(value, gradient)`` pair of callables.
    """
    if not 0 <= dof < space.ndof:
        raise SpaceError("DOF index out of range")
    if dof < space.num_vertex_dofs:
        z = int(np.nonzero(space.vertex_dof == dof)[0][0])
        if isinstance(v, BrokenFunction):
            return _vertex_value_broken(v, z)
        f, _ = _callable_pair(v)
        return float(f(space.mesh.vertices[z]))
    edge = int(np.nonzero(space.edge_dof == dof)[0][0])
    if isinstance(v, BrokenFunction):
        return _edge_mean_normal_derivative_broken(space, v, edge)
    _, grad = _callable_pair(v)
    return _edge_mean_normal_derivative_callable(space.mesh, grad, edge)


def _all_dof_values(space, v):
    mesh = space.mesh
    out = np.zeros(space.ndof)
    if isinstance(v, BrokenFunction):
        if v.mesh is not mesh:
            ancestor_map(v.mesh, mesh)  # raises unless a refinement
        for z in np.nonzero(space.vertex_dof >= 0)[0]:
            out[space.vertex_dof[z]] = _vertex_value_broken(v, int(z))
        for f in np.nonzero(space.edge_dof >= 0)[0]:
            out[space.edge_dof[f]] = _edge_mean_normal_derivative_broken(
                space, v, int(f))
        return out
    fval, grad = _callable_pair(v)
    for z in np.nonzero(space.vertex_dof >= 0)[0]:
        out[space.vertex_dof[z]] = float(fval(mesh.vertices[z]))
    for f in np.nonzero(space.edge_dof >= 0)[0]:
        out[space.edge_dof[f]] = _edge_mean_normal_derivative_callable(
            mesh, grad, int(f))
    return out


def morley_interpolate(space: MorleySpace, v) -> np.ndarray:
    """Interpolate ``v`` into the space by matching all DOF functionals.

    ``v`` may be a smooth function given as a ``(value, gradient)`` pair or a
    BrokenFunction living on a refinement of the space's mesh.  The result
    reproduces quadratics and its piecewise Hessian equals the elementwise
    mean of the broken Hessian of ``v``.
    """
    return _all_dof_values(space, v)


def evaluate_broken(bf: BrokenFunction, point, triangle: int, tol=1e-12):
    """Value, gradient and Hessian of a broken function at ``point``.

    The point must lie in the hinted triangle up to barycentric tolerance.
    """
    mesh = bf.mesh
    tri = mesh.triangles[triangle]
    p = mesh.vertices[tri]
    A = np.vstack([np.ones(3), p.T])
    lam = np.linalg.solve(A, np.array([1.0, point[0], point[1]]))
    if lam.min() < -tol:
        raise SpaceError("point lies outside the hinted triangle")
    point = np.asarray(point, dtype=float)
    return (float(bf.value(triangle, point)[0]),
            bf.gradient(triangle, point)[0],
            bf.hessian(triangle))


def save_coefficients(space: MorleySpace, u, path):
    """Write a coefficient vector as JSON together with a space fingerprint.

    The fingerprint hashes the mesh including its boundary labels, so a
    vector cannot silently be reused on a different space.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (space.ndof,):
        raise SpaceError(f"expected coefficient vector of length {space.ndof}")
    doc = {"fingerprint": space.fingerprint(), "ndof": space.ndof,
           "coefficients": [float(v) for v in u]}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_coefficients(space: MorleySpace, path) -> np.ndarray:
    """Read a coefficient vector, rejecting fingerprint mismatches."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("fingerprint") != space.fingerprint():
        raise SpaceError("coefficient file belongs to a different space")
    u = np.asarray(doc["coefficients"], dtype=float)
    if u.shape != (space.ndof,):
        raise SpaceError("coefficient length mismatch")
    return u


def prolong_to_fine(arg, fine_mesh: Triangulation, space: MorleySpace = None) -> BrokenFunction:
    """Restrict a coarse piecewise quadratic to every triangle of a refinement.

    ``arg`` is a BrokenFunction, or a Morley coefficient vector if ``space``
    is given.  Hessian coefficients are inherited bitwise, so the broken
    Hessian norm is preserved exactly.
    """
    if not isinstance(arg, BrokenFunction):
        if space is None:
            raise SpaceError("pass a BrokenFunction or (coeffs, space=...)")
        arg = space.to_broken(np.asarray(arg))
    coarse = arg.mesh
    amap = ancestor_map(fine_mesh, coarse)
    delta = fine_mesh.centroids - coarse.centroids[amap]
    coeffs = poly_shift(arg.coeffs[amap], delta)
    return BrokenFunction(fine_mesh, coeffs)
