"""Independent oracles used by the test suite.

Each oracle takes a different computational route from the implementation
it checks: cyclic Jacobi rotations for the eigensolver, exhaustive subset
search for bulk marking, pointwise weighted least squares on an unrelated
quadrature rule for elementwise projections, and symbolic element
integration for the plate forms.
"""

import itertools

import numpy as np


def jacobi_gevp(A, M, sweeps=100, tol=1e-14):
    """Generalized symmetric eigenvalues by Cholesky reduction followed by
    classical cyclic Jacobi rotations.  Dense, brute force, independent of
    LAPACK's tridiagonal path."""
    A = np.asarray(A, dtype=float)
    M = np.asarray(M, dtype=float)
    L = np.linalg.cholesky(M)
    Linv = np.linalg.inv(L)
    C = Linv @ A @ Linv.T
    C = 0.5 * (C + C.T)
    n = C.shape[0]
    V = np.eye(n)
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(C, -1) ** 2))
        if off < tol * np.linalg.norm(C):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if C[p, q] == 0.0:
                    continue
                theta = 0.5 * np.arctan2(2 * C[p, q], C[q, q] - C[p, p])
                c, s = np.cos(theta), np.sin(theta)
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                C = J.T @ C @ J
                V = V @ J
    w = np.diag(C).copy()
    order = np.argsort(w)
    vecs = np.linalg.solve(L.T, V[:, order])
    return w[order], vecs


def dorfler_min_cardinality(eta2, theta):
    """Smallest subset cardinality with sum >= theta * total, by exhaustive
    search over all subsets."""
    eta2 = list(map(float, eta2))
    total = sum(eta2)
    target = theta * total
    n = len(eta2)
    for k in range(n + 1):
        for combo in itertools.combinations(range(n), k):
            if sum(eta2[i] for i in combo) >= target:
                return k
    return n


def duffy_rule(n):
    """Collapsed tensor rule on the reference triangle, measure-1 weights."""
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    lam1 = U.ravel()
    lam2 = (V * (1 - U)).ravel()
    pts = np.stack([lam1, lam2, 1 - lam1 - lam2], axis=1)
    wts = (WU * WV * (1 - U)).ravel() * 2.0
    return pts, wts


def osc_oracle(mesh, f, k, n_gauss=10):
    """Oscillation norm by weighted pointwise least squares per element.

    Builds the projection from scratch: sample on a dense collapsed rule and
    solve the sqrt-weighted least-squares fit with monomials, then integrate
    the squared residual with the same rule.
    """
    exps = {0: [(0, 0)], 1: [(0, 0), (1, 0), (0, 1)],
            2: [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]}[k]
    pts_b, wts = duffy_rule(n_gauss)
    total = 0.0
    for t in range(mesh.num_triangles):
        P = mesh.vertices[mesh.triangles[t]]
        pts = pts_b @ P
        fv = np.array([f(x, y) for x, y in pts], dtype=float)
        A = np.stack([pts[:, 0] ** a * pts[:, 1] ** b for a, b in exps], axis=1)
        sw = np.sqrt(wts)
        coef, *_ = np.linalg.lstsq(A * sw[:, None], fv * sw, rcond=None)
        res2 = np.sum(wts * (fv - A @ coef) ** 2) * mesh.areas[t]
        total += mesh.areas[t] ** 2 * res2
    return float(np.sqrt(total))


def morley_basis_symbolic(tri_coords, normals, lengths):
    """Symbolic Morley basis on one triangle via sympy.

    ``normals`` are the global unit normals of the edges opposite each
    vertex.  Returns six sympy polynomials dual to (vertex values, mean
    normal derivatives), plus the coordinates symbols.
    """
    import sympy as sym

    x, y = sym.symbols("x y")
    coeffs = sym.symbols("c0:6")
    p = (coeffs[0] + coeffs[1] * x + coeffs[2] * y + coeffs[3] * x ** 2
         + coeffs[4] * x * y + coeffs[5] * y ** 2)
    gx, gy = sym.diff(p, x), sym.diff(p, y)
    conditions = []
    for vx, vy in tri_coords:
        conditions.append(p.subs({x: vx, y: vy}))
    for i in range(3):
        a = sym.Matrix(tri_coords[(i + 1) % 3])
        b = sym.Matrix(tri_coords[(i + 2) % 3])
        nu = sym.Matrix(normals[i])
        s = sym.symbols("s")
        pt = a + s * (b - a)
        dn = (gx.subs({x: pt[0], y: pt[1]}) * nu[0]
              + gy.subs({x: pt[0], y: pt[1]}) * nu[1])
        conditions.append(sym.integrate(dn, (s, 0, 1)))
    basis = []
    for j in range(6):
        rhs = [sym.Integer(1 if i == j else 0) for i in range(6)]
        sol = sym.solve([c - r for c, r in zip(conditions, rhs)], coeffs, dict=True)
        assert len(sol) == 1
        basis.append(p.subs(sol[0]))
    return basis, (x, y)


def energy_product_symbolic(p1, p2, tri_coords, xy):
    """Exact integral over a triangle of the Hessian contraction of two
    symbolic quadratics (constant Hessians; uses the exact area)."""
    import sympy as sym

    x, y = xy
    h1 = [sym.diff(p1, x, 2), sym.diff(p1, y, 2), sym.diff(p1, x, y)]
    h2 = [sym.diff(p2, x, 2), sym.diff(p2, y, 2), sym.diff(p2, x, y)]
    a = sym.Matrix(tri_coords[1]) - sym.Matrix(tri_coords[0])
    b = sym.Matrix(tri_coords[2]) - sym.Matrix(tri_coords[0])
    area = sym.Rational(1, 2) * sym.Abs(a[0] * b[1] - a[1] * b[0])
    dot = h1[0] * h2[0] + h1[1] * h2[1] + 2 * h1[2] * h2[2]
    return sym.simplify(area * dot)


def richardson_limit_synthetic(limit, c, ratio, n):
    """Synthetic sequence v_k = limit - c * ratio^-k."""
    return [limit - c * ratio ** (-k) for k in range(n)]
