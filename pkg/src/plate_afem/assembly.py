"""Assembly of the broken-Hessian stiffness form, mass form, loads and
elementwise polynomial projections.

Stiffness entries are exact (piecewise quadratics have constant Hessians);
mass entries use a rule of degree four which is exact for products of
quadratics.  Element loops are vectorised and reduce in a fixed order, so
repeated assembly is bit identical.
"""

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .quadrature import triangle_rule
from .space import MorleySpace, hessians

__all__ = [
    "SymSparseMatrix",
    "SingularSystemError",
    "assemble_stiffness",
    "assemble_mass",
    "load_vector",
    "solve_linear",
    "solve_with_load",
    "project_pk",
    "osc_k",
    "stiffness_kernel_dimension",
]


class SingularSystemError(Exception):
    """The reduced linear system is singular.

    For the plate forms this signals that the boundary conditions admit a
    nonzero affine function, i.e. the space intersects the affine functions
    nontrivially.
    """


class SymSparseMatrix:
    """Symmetric sparse matrix stored as its lower triangle.

    Symmetry is exact by construction; ``full()`` mirrors the lower triangle.
    """

    def __init__(self, n, lower_csr):
        self.n = int(n)
        self.lower = lower_csr.tocsr()
        self.lower.sum_duplicates()
        self._full = None

    @classmethod
    def from_triplets(cls, n, rows, cols, vals):
        """Accumulate symmetric triplets, keeping only the lower triangle."""
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        vals = np.asarray(vals, dtype=float)
        keep = rows >= cols
        lower = sparse.coo_matrix((vals[keep], (rows[keep], cols[keep])),
                                  shape=(n, n))
        return cls(n, lower.tocsr())

    def full(self) -> sparse.csr_matrix:
        if self._full is None:
            strict = sparse.tril(self.lower, k=-1)
            self._full = (self.lower + strict.T).tocsr()
        return self._full

    def toarray(self) -> np.ndarray:
        return self.full().toarray()

    def matvec(self, x):
        return self.full() @ x

    @property
    def nnz(self):
        return self.lower.nnz

    def norm1(self) -> float:
        return float(spla.norm(self.full(), 1)) if self.n else 0.0

    def export_matrixmarket(self, path):
        """Write MatrixMarket coordinate symmetric format (1-based, lower)."""
        coo = self.lower.tocoo()
        with open(path, "w") as fh:
            fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
            fh.write(f"{self.n} {self.n} {coo.nnz}\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def _scatter_symmetric(space, local):
    """Scatter (T, 6, 6) element matrices into a SymSparseMatrix."""
    dofs = space.cell_dofs                      # (T, 6), -1 = constrained
    rows = np.repeat(dofs[:, :, None], 6, axis=2).ravel()
    cols = np.repeat(dofs[:, None, :], 6, axis=1).ravel()
    vals = local.ravel()
    keep = (rows >= 0) & (cols >= 0)
    return SymSparseMatrix.from_triplets(space.ndof, rows[keep], cols[keep],
                                         vals[keep])


def assemble_stiffness(space: MorleySpace) -> SymSparseMatrix:
    """Broken-Hessian stiffness matrix; entries are exact."""
    H = space.basis_hessians                    # (T, 6, 3): h11, h22, h12
    w = np.sqrt(space.mesh.areas)[:, None, None]
    feat = H * np.array([1.0, 1.0, np.sqrt(2.0)]) * w
    local = np.einsum("tia,tja->tij", feat, feat)
    return _scatter_symmetric(space, local)


def assemble_mass(space: MorleySpace) -> SymSparseMatrix:
    """L2 mass matrix via a degree-4 rule (exact for quadratic pairs)."""
    vals = _basis_at_rule(space, triangle_rule(4))
    local = np.einsum("q,tqi,tqj->tij", triangle_rule(4).weights, vals, vals)
    local *= space.mesh.areas[:, None, None]
    return _scatter_symmetric(space, local)


def _basis_at_rule(space, rule):
    mesh = space.mesh
    pts = np.einsum("qi,tid->tqd", rule.points, mesh.vertices[mesh.triangles])
    d = pts - mesh.centroids[:, None, :]
    mono = np.stack([np.ones_like(d[..., 0]), d[..., 0], d[..., 1],
                     d[..., 0] ** 2, d[..., 0] * d[..., 1], d[..., 1] ** 2],
                    axis=-1)                    # (T, nq, 6)
    return np.einsum("tqm,tim->tqi", mono, space.basis)


def load_vector(space: MorleySpace, f, quad_degree=4) -> np.ndarray:
    """Right-hand side with entries ``int f * basis_j`` by quadrature."""
    rule = triangle_rule(quad_degree)
    mesh = space.mesh
    pts = np.einsum("qi,tid->tqd", rule.points, mesh.vertices[mesh.triangles])
    fvals = _sample(f, pts)
    basis = _basis_at_rule(space, rule)
    local = np.einsum("q,tq,tqi->ti", rule.weights, fvals, basis)
    local *= mesh.areas[:, None]
    out = np.zeros(space.ndof)
    dofs = space.cell_dofs.ravel()
    keep = dofs >= 0
    np.add.at(out, dofs[keep], local.ravel()[keep])
    return out


def _sample(f, pts):
    flat = pts.reshape(-1, 2)
    try:
        vals = np.asarray(f(flat[:, 0], flat[:, 1]), dtype=float)
        if vals.shape != (len(flat),):
            raise TypeError
    except TypeError:
        vals = np.array([f(p) for p in flat], dtype=float)
    return vals.reshape(pts.shape[:-1])


def solve_with_load(space: MorleySpace, F, method="direct",
                    rtol=1e-10) -> np.ndarray:
    """Solve the stiffness system for a given load vector."""
    A = assemble_stiffness(space).full()
    F = np.asarray(F, dtype=float)
    if space.ndof == 0:
        return np.zeros(0)
    if method == "direct":
        with np.errstate(all="ignore"):
            u = spla.spsolve(A.tocsc(), F)
    elif method == "cg":
        d = A.diagonal()
        if np.any(d <= 0):
            raise SingularSystemError("nonpositive diagonal; system is singular")
        M = sparse.diags(1.0 / d)
        u, info = spla.cg(A, F, M=M, rtol=1e-14, atol=0.0, maxiter=20 * space.ndof)
        if info != 0:
            raise SingularSystemError("CG failed to converge")
    else:
        raise ValueError(f"unknown method {method!r}")
    norm_f = np.linalg.norm(F)
    resid = np.linalg.norm(A @ u - F)
    if not np.all(np.isfinite(u)) or resid > rtol * max(norm_f, 1e-300):
        raise SingularSystemError(
            "singular stiffness system: the boundary conditions leave a "
            "nonzero affine function in the space")
    return u


def solve_linear(space: MorleySpace, f, quad_degree=4, method="direct") -> np.ndarray:
    """Morley solution of the linear plate problem with source ``f``."""
    return solve_with_load(space, load_vector(space, f, quad_degree), method)


_PK_EXPONENTS = {0: [(0, 0)], 1: [(0, 0), (1, 0), (0, 1)],
                 2: [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]}


def project_pk(mesh, f, k, quad_degree=8):
    """Elementwise L2 projection onto polynomials of degree <= k.

    Returns coefficients (T, n_k) in scaled centroid monomials and the
    projected values at the quadrature points used.
    """
    if k not in _PK_EXPONENTS:
        raise ValueError("k must be 0, 1 or 2")
    rule = triangle_rule(quad_degree)
    pts = np.einsum("qi,tid->tqd", rule.points, mesh.vertices[mesh.triangles])
    d = (pts - mesh.centroids[:, None, :]) / mesh.h_t[:, None, None]
    basis = np.stack([d[..., 0] ** a * d[..., 1] ** b
                      for a, b in _PK_EXPONENTS[k]], axis=-1)   # (T, nq, nb)
    w = rule.weights
    G = np.einsum("q,tqa,tqb->tab", w, basis, basis)
    fvals = _sample(f, pts)
    rhs = np.einsum("q,tq,tqa->ta", w, fvals, basis)
    coeffs = np.linalg.solve(G, rhs[..., None])[..., 0]
    proj_at_pts = np.einsum("ta,tqa->tq", coeffs, basis)
    return coeffs, proj_at_pts, fvals, rule


def osc_k(mesh, f, k, quad_degree=8) -> float:
    """Data oscillation ``|| h^2 (1 - Pi_k) f ||_L2``."""
    _, proj, fvals, rule = project_pk(mesh, f, k, quad_degree)
    res2 = np.einsum("q,tq->t", rule.weights, (fvals - proj) ** 2) * mesh.areas
    return float(np.sqrt(np.sum(mesh.areas ** 2 * res2)))


def stiffness_kernel_dimension(space, tol=1e-8) -> int:
    """Kernel dimension of the stiffness form on the reduced space (dense)."""
    A = assemble_stiffness(space).toarray()
    if A.size == 0:
        return 0
    evals = np.linalg.eigvalsh(A)
    scale = max(evals.max(), 1.0)
    return int(np.sum(evals < tol * scale))
