"""
Reference simplex operators for the nodal DG discretization.

The bi-unit reference triangle has vertices (-1,-1), (1,-1), (-1,1); the
reference tetrahedron adds (-1,-1,1).  Nodes are warp-and-blend points,
the modal basis is the orthonormal collapsed-coordinate basis, and every
quadrature rule is a collapsed Gauss-Jacobi product rule that is checked
against closed-form monomial integrals when the element is built.
"""
import itertools
import logging
import math
from functools import lru_cache

import numpy as np
from scipy.special import gamma, roots_jacobi
from scipy.spatial import Delaunay

from .exceptions import ConfigurationError, ShapeError

logger = logging.getLogger(__name__)

MAX_DEGREE = 8
QUADRATURE_TOLERANCE = 1e-12

# Optimised blend parameters, indexed by N - 1.
ALPHA_2D = (0.0, 0.0, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832,
            1.3648, 1.4773, 1.4959, 1.5743, 1.5770, 1.6223, 1.6258)
ALPHA_3D = (0.0, 0.0, 0.0, 0.1002, 1.1332, 1.5608, 1.3413, 1.2577, 1.1603,
            1.10153, 0.6080, 0.4523, 0.8856, 0.8717, 0.9655)

VERTICES = {
    2: np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]]),
    3: np.array([[-1.0, -1.0, -1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0],
                 [-1.0, -1.0, 1.0]]),
}

FACES = {
    2: ((0, 1), (1, 2), (2, 0)),
    3: ((0, 1, 2), (0, 1, 3), (1, 2, 3), (0, 2, 3)),
}

MEASURE = {2: 2.0, 3: 4.0 / 3.0}


def basis_count(dim, N):
    if dim == 2:
        return (N + 1) * (N + 2) // 2
    return (N + 1) * (N + 2) * (N + 3) // 6


def jacobi_p(x, alpha, beta, n):
    """Orthonormal Jacobi polynomial P_n^(alpha, beta) evaluated at x."""
    x = np.asarray(x, dtype=float)
    gamma0 = (2.0 ** (alpha + beta + 1) / (alpha + beta + 1)
              * gamma(alpha + 1) * gamma(beta + 1) / gamma(alpha + beta + 1))
    p_old = np.full_like(x, 1.0 / math.sqrt(gamma0))
    if n == 0:
        return p_old
    gamma1 = (alpha + 1) * (beta + 1) / (alpha + beta + 3) * gamma0
    p = ((alpha + beta + 2) * x / 2 + (alpha - beta) / 2) / math.sqrt(gamma1)
    if n == 1:
        return p
    a_old = 2.0 / (2 + alpha + beta) * math.sqrt(
        (alpha + 1) * (beta + 1) / (alpha + beta + 3))
    for i in range(1, n):
        h1 = 2 * i + alpha + beta
        a_new = 2.0 / (h1 + 2) * math.sqrt(
            (i + 1) * (i + 1 + alpha + beta) * (i + 1 + alpha)
            * (i + 1 + beta) / (h1 + 1) / (h1 + 3))
        b_new = -(alpha ** 2 - beta ** 2) / h1 / (h1 + 2)
        p_old, p = p, (-a_old * p_old + (x - b_new) * p) / a_new
        a_old = a_new
    return p


def grad_jacobi_p(x, alpha, beta, n):
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.zeros_like(x)
    return math.sqrt(n * (n + alpha + beta + 1)) * jacobi_p(
        x, alpha + 1, beta + 1, n - 1)


def gauss_lobatto(n):
    """n + 1 Legendre-Gauss-Lobatto points on [-1, 1]."""
    if n == 1:
        return np.array([-1.0, 1.0])
    interior, _ = roots_jacobi(n - 1, 1.0, 1.0)
    return np.concatenate([[-1.0], np.sort(interior), [1.0]])


def warp_factor(n, r):
    """Warp between equispaced and LGL points, divided by 1 - r^2."""
    r = np.asarray(r, dtype=float)
    lgl = gauss_lobatto(n)
    req = np.linspace(-1.0, 1.0, n + 1)
    veq = np.stack([jacobi_p(req, 0, 0, i) for i in range(n + 1)], axis=1)
    pmat = np.stack([jacobi_p(r, 0, 0, i) for i in range(n + 1)])
    lmat = np.linalg.solve(veq.T, pmat)
    warp = lmat.T @ (lgl - req)
    interior = np.abs(r) < 1.0 - 1.0e-10
    scale = 1.0 - (interior * r) ** 2
    return warp / scale + warp * (interior - 1)


def _edge_shift(n, alpha, l1, l2, l3):
    w1 = 4 * l2 * l3 * warp_factor(n, l3 - l2) * (1 + (alpha * l1) ** 2)
    w2 = 4 * l1 * l3 * warp_factor(n, l1 - l3) * (1 + (alpha * l2) ** 2)
    w3 = 4 * l1 * l2 * warp_factor(n, l2 - l1) * (1 + (alpha * l3) ** 2)
    dx = (w1 + math.cos(2 * math.pi / 3) * w2
          + math.cos(4 * math.pi / 3) * w3)
    dy = math.sin(2 * math.pi / 3) * w2 + math.sin(4 * math.pi / 3) * w3
    return dx, dy


def _lattice(dim, n):
    """Multi-indices of the equispaced lattice of order n."""
    return np.array([idx for idx in itertools.product(range(n + 1),
                                                      repeat=dim)
                     if sum(idx) <= n], dtype=float)


def nodes_2d(n):
    alpha = ALPHA_2D[n - 1]
    idx = _lattice(2, n)
    l3 = idx[:, 0] / n
    l1 = idx[:, 1] / n
    l2 = 1.0 - l1 - l3
    x = -l2 + l3
    y = (-l2 - l3 + 2 * l1) / math.sqrt(3.0)
    dx, dy = _edge_shift(n, alpha, l1, l2, l3)
    x = x + dx
    y = y + dy
    l1 = (math.sqrt(3.0) * y + 1.0) / 3.0
    l3 = (3.0 * x - math.sqrt(3.0) * y + 2.0) / 6.0
    return np.column_stack([2 * l3 - 1, 2 * l1 - 1])


def nodes_3d(n):
    alpha = ALPHA_3D[n - 1]
    tol = 1e-10
    rst = -1.0 + 2.0 * _lattice(3, n) / n
    r, s, t = rst.T
    l1 = (1 + t) / 2
    l2 = (1 + s) / 2
    l3 = -(1 + r + s + t) / 2
    l4 = (1 + r) / 2

    v1 = np.array([-1.0, -1.0 / math.sqrt(3.0), -1.0 / math.sqrt(6.0)])
    v2 = np.array([1.0, -1.0 / math.sqrt(3.0), -1.0 / math.sqrt(6.0)])
    v3 = np.array([0.0, 2.0 / math.sqrt(3.0), -1.0 / math.sqrt(6.0)])
    v4 = np.array([0.0, 0.0, 3.0 / math.sqrt(6.0)])
    tangents = [
        (v2 - v1, v3 - 0.5 * (v1 + v2)),
        (v2 - v1, v4 - 0.5 * (v1 + v2)),
        (v3 - v2, v4 - 0.5 * (v2 + v3)),
        (v3 - v1, v4 - 0.5 * (v1 + v3)),
    ]
    faces = [(l1, l2, l3, l4), (l2, l1, l3, l4), (l3, l1, l4, l2),
             (l4, l1, l3, l2)]

    xyz = (np.outer(l3, v1) + np.outer(l4, v2) + np.outer(l2, v3)
           + np.outer(l1, v4))
    shift = np.zeros_like(xyz)
    for (la, lb, lc, ld), (t1, t2) in zip(faces, tangents):
        t1 = t1 / np.linalg.norm(t1)
        t2 = t2 / np.linalg.norm(t2)
        warp1, warp2 = _edge_shift(n, alpha, lb, lc, ld)
        blend = lb * lc * ld
        denom = (lb + 0.5 * la) * (lc + 0.5 * la) * (ld + 0.5 * la)
        ids = denom > tol
        blend[ids] = (1 + (alpha * la[ids]) ** 2) * blend[ids] / denom[ids]
        shift += np.outer(blend * warp1, t1) + np.outer(blend * warp2, t2)
        on_edge = (la < tol) & (((lb > tol).astype(int) + (lc > tol)
                                 + (ld > tol)) < 3)
        shift[on_edge] = (np.outer(warp1[on_edge], t1)
                          + np.outer(warp2[on_edge], t2))
    xyz = xyz + shift

    frame = np.column_stack([v2 - v1, v3 - v1, v4 - v1])
    mu = np.linalg.solve(frame, (xyz - v1).T).T
    return 2.0 * mu - 1.0


def collapse(points):
    """Map reference coordinates to collapsed (a, b[, c]) coordinates."""
    points = np.atleast_2d(points)
    tol = 1e-13
    if points.shape[1] == 2:
        r, s = points.T
        denom = 1.0 - s
        safe = np.abs(denom) > tol
        a = np.where(safe, 2 * (1 + r) / np.where(safe, denom, 1.0) - 1, -1.0)
        return a, s
    r, s, t = points.T
    denom_a = -s - t
    safe_a = np.abs(denom_a) > tol
    a = np.where(safe_a, 2 * (1 + r) / np.where(safe_a, denom_a, 1.0) - 1,
                 -1.0)
    denom_b = 1.0 - t
    safe_b = np.abs(denom_b) > tol
    b = np.where(safe_b, 2 * (1 + s) / np.where(safe_b, denom_b, 1.0) - 1,
                 -1.0)
    return a, b, t


def _modes(dim, N):
    if dim == 2:
        return [(i, j) for i in range(N + 1) for j in range(N + 1 - i)]
    return [(i, j, k) for i in range(N + 1) for j in range(N + 1 - i)
            for k in range(N + 1 - i - j)]


def simplex_2d(a, b, i, j):
    h1 = jacobi_p(a, 0, 0, i)
    h2 = jacobi_p(b, 2 * i + 1, 0, j)
    return math.sqrt(2.0) * h1 * h2 * (1 - b) ** i


def grad_simplex_2d(a, b, i, j):
    fa = jacobi_p(a, 0, 0, i)
    dfa = grad_jacobi_p(a, 0, 0, i)
    gb = jacobi_p(b, 2 * i + 1, 0, j)
    dgb = grad_jacobi_p(b, 2 * i + 1, 0, j)

    dr = dfa * gb
    if i > 0:
        dr = dr * (0.5 * (1 - b)) ** (i - 1)
    ds = dfa * (gb * (0.5 * (1 + a)))
    if i > 0:
        ds = ds * (0.5 * (1 - b)) ** (i - 1)
    tmp = dgb * (0.5 * (1 - b)) ** i
    if i > 0:
        tmp = tmp - 0.5 * i * gb * (0.5 * (1 - b)) ** (i - 1)
    ds = ds + fa * tmp
    scale = 2.0 ** (i + 0.5)
    return dr * scale, ds * scale


def simplex_3d(a, b, c, i, j, k):
    h1 = jacobi_p(a, 0, 0, i)
    h2 = jacobi_p(b, 2 * i + 1, 0, j)
    h3 = jacobi_p(c, 2 * (i + j) + 2, 0, k)
    return (2 * math.sqrt(2.0) * h1 * h2 * (1 - b) ** i * h3
            * (1 - c) ** (i + j))


def grad_simplex_3d(a, b, c, i, j, k):
    fa = jacobi_p(a, 0, 0, i)
    dfa = grad_jacobi_p(a, 0, 0, i)
    gb = jacobi_p(b, 2 * i + 1, 0, j)
    dgb = grad_jacobi_p(b, 2 * i + 1, 0, j)
    hc = jacobi_p(c, 2 * (i + j) + 2, 0, k)
    dhc = grad_jacobi_p(c, 2 * (i + j) + 2, 0, k)

    dr = dfa * (gb * hc)
    if i > 0:
        dr = dr * (0.5 * (1 - b)) ** (i - 1)
    if i + j > 0:
        dr = dr * (0.5 * (1 - c)) ** (i + j - 1)

    ds = 0.5 * (1 + a) * dr
    tmp = dgb * (0.5 * (1 - b)) ** i
    if i > 0:
        tmp = tmp - 0.5 * i * (gb * (0.5 * (1 - b)) ** (i - 1))
    if i + j > 0:
        tmp = tmp * (0.5 * (1 - c)) ** (i + j - 1)
    tmp = fa * (tmp * hc)
    ds = ds + tmp

    dt = 0.5 * (1 + a) * dr + 0.5 * (1 + b) * tmp
    tmp = dhc * (0.5 * (1 - c)) ** (i + j)
    if i + j > 0:
        tmp = tmp - 0.5 * (i + j) * (hc * (0.5 * (1 - c)) ** (i + j - 1))
    tmp = fa * (gb * tmp) * (0.5 * (1 - b)) ** i
    dt = dt + tmp

    scale = 2.0 ** (2 * i + j + 1.5)
    return dr * scale, ds * scale, dt * scale


def modal_basis(dim, N, points):
    """Orthonormal modal basis at points, shape (npts, Np)."""
    coords = collapse(points)
    if dim == 2:
        return np.column_stack([simplex_2d(coords[0], coords[1], *mode)
                                for mode in _modes(dim, N)])
    return np.column_stack([simplex_3d(coords[0], coords[1], coords[2],
                                       *mode) for mode in _modes(dim, N)])


def grad_modal_basis(dim, N, points):
    """Reference gradients of the modal basis, one (npts, Np) per axis."""
    coords = collapse(points)
    grad = grad_simplex_2d if dim == 2 else grad_simplex_3d
    columns = [grad(*(coords + mode)) for mode in _modes(dim, N)]
    return tuple(np.column_stack([col[axis] for col in columns])
                 for axis in range(dim))


def volume_quadrature(dim, n):
    """Collapsed Gauss-Jacobi rule with n points per direction."""
    xa, wa = roots_jacobi(n, 0.0, 0.0)
    xb, wb = roots_jacobi(n, 1.0, 0.0)
    if dim == 2:
        a, b = (g.ravel() for g in np.meshgrid(xa, xb, indexing='ij'))
        w = np.outer(wa, wb).ravel() / 2.0
        r = 0.5 * (1 + a) * (1 - b) - 1
        return np.column_stack([r, b]), w
    xc, wc = roots_jacobi(n, 2.0, 0.0)
    a, b, c = (g.ravel() for g in np.meshgrid(xa, xb, xc, indexing='ij'))
    w = np.einsum('i,j,k->ijk', wa, wb, wc).ravel() / 8.0
    r = 0.25 * (1 + a) * (1 - b) * (1 - c) - 1
    s = 0.5 * (1 + b) * (1 - c) - 1
    return np.column_stack([r, s, c]), w


def face_quadrature(dim, n):
    """Face rule as barycentric weights on the face vertices.

    Returns (bary, weights) with bary of shape (Nfq, dim); weights sum to 2.
    The triangle rule is symmetrised over all vertex permutations so that
    any orientation of a shared face maps the point set onto itself.
    """
    if dim == 2:
        xi, w = roots_jacobi(n, 0.0, 0.0)
        return np.column_stack([(1 - xi) / 2, (1 + xi) / 2]), w
    pts, w = volume_quadrature(2, n)
    bary = np.column_stack([-(pts[:, 0] + pts[:, 1]) / 2,
                            (pts[:, 0] + 1) / 2, (pts[:, 1] + 1) / 2])
    perms = list(itertools.permutations(range(3)))
    bary = np.concatenate([bary[:, list(p)] for p in perms])
    w = np.concatenate([w] * len(perms)) / len(perms)
    keys = np.round(bary, 12)
    unique, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    merged = np.zeros(len(unique))
    np.add.at(merged, inverse, w)
    first = np.zeros(len(unique), dtype=int)
    first[inverse[::-1]] = np.arange(len(inverse))[::-1]
    return bary[first], merged


def monomial_integral(exponents):
    """Exact integral of prod(((r_k + 1) / 2) ** e_k) over the reference."""
    dim = len(exponents)
    numer = 2.0 ** dim
    for e in exponents:
        numer *= math.factorial(e)
    return numer / math.factorial(sum(exponents) + dim)


def check_quadrature(dim, points, weights, degree):
    x = (points + 1.0) / 2.0
    for exponents in itertools.product(range(degree + 1), repeat=dim):
        if sum(exponents) > degree:
            continue
        exact = monomial_integral(exponents)
        approx = weights @ np.prod(x ** np.array(exponents), axis=1)
        if abs(approx - exact) > QUADRATURE_TOLERANCE * abs(exact):
            raise ConfigurationError(
                'quadrature is not exact for monomial %s (got %.16e, '
                'expected %.16e)' % (exponents, approx, exact))


class ReferenceElement(object):
    """All degree-N operators on the reference simplex.

    Instances are immutable once built and shared by every element.
    """

    def __init__(self, dim, N):
        if dim not in (2, 3):
            raise ConfigurationError('unsupported dimension %r' % (dim,))
        if not isinstance(N, (int, np.integer)) or not 1 <= N <= MAX_DEGREE:
            raise ConfigurationError(
                'unsupported degree %r (1 <= N <= %d)' % (N, MAX_DEGREE))
        self.dim = dim
        self.N = int(N)
        self.Np = basis_count(dim, N)
        self.vertices = VERTICES[dim]
        self.faces = FACES[dim]
        self.nfaces = dim + 1
        self.measure = MEASURE[dim]

        self.nodes = nodes_2d(self.N) if dim == 2 else nodes_3d(self.N)
        self.V = modal_basis(dim, self.N, self.nodes)
        self.Vinv = np.linalg.inv(self.V)
        self.mass = self.Vinv.T @ self.Vinv
        self.mass_inv = self.V @ self.V.T
        self.mass_condition = float(np.linalg.cond(self.mass))
        grads = grad_modal_basis(dim, self.N, self.nodes)
        self.D = np.stack([g @ self.Vinv for g in grads])
        self.S = np.einsum('ij,ajk->aik', self.mass, self.D)

        self.quad_points, self.quad_weights = volume_quadrature(dim,
                                                                self.N + 1)
        check_quadrature(dim, self.quad_points, self.quad_weights,
                         2 * self.N + 1)
        self.Nq = len(self.quad_weights)
        self.Vq = self.interpolation_matrix(self.quad_points)
        self.Pq = self.mass_inv @ self.Vq.T * self.quad_weights

        self.face_bary, self.face_weights = face_quadrature(dim, self.N + 1)
        if dim == 3:
            check_quadrature(2, 2 * self.face_bary[:, 1:] - 1,
                             self.face_weights, 2 * self.N + 1)
        self.Nfq = len(self.face_weights)
        self.face_points = np.stack([self.face_bary @ self.vertices[list(f)]
                                     for f in self.faces])
        self.Vf = np.stack([self.interpolation_matrix(pts)
                            for pts in self.face_points])
        self.face_mass = np.einsum('fqi,q,fqj->fij', self.Vf,
                                   self.face_weights, self.Vf)
        self.lift = np.einsum('ij,fjk->fik', self.mass_inv, self.face_mass)
        self.lift_quadrature = np.einsum('ij,fqj,q->fiq', self.mass_inv,
                                         self.Vf, self.face_weights)
        logger.debug('reference element dim=%d N=%d Np=%d Nq=%d Nfq=%d '
                     'cond(M)=%.3e', dim, self.N, self.Np, self.Nq, self.Nfq,
                     self.mass_condition)

    def __repr__(self):
        return '<ReferenceElement dim=%d N=%d>' % (self.dim, self.N)

    def interpolation_matrix(self, points):
        """Nodal basis evaluated at reference points, shape (npts, Np)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dim:
            raise ShapeError('expected %d-dimensional points, got shape %s'
                             % (self.dim, points.shape))
        return modal_basis(self.dim, self.N, points) @ self.Vinv

    def barycentric(self, points):
        points = np.atleast_2d(points)
        lam = (points + 1.0) / 2.0
        return np.column_stack([1.0 - lam.sum(axis=1), lam])

    def nodes_for_plot(self):
        """Sub-simplex connectivity of the nodal set."""
        return Delaunay(self.nodes).simplices.copy()


@lru_cache(maxsize=None)
def build_reference(dim, N):
    return ReferenceElement(dim, N)


def quadrature_project(ref, values):
    """L2 projection of samples at the volume quadrature points."""
    values = np.asarray(values)
    if values.shape[0] != ref.Nq:
        raise ShapeError('expected %d quadrature values, got %d'
                         % (ref.Nq, values.shape[0]))
    return np.tensordot(ref.Pq, values, axes=(1, 0))
