"""
Weight-adjusted mass matrices applied through quadrature.

Blocks are laid out fields first: a nodal block ``u`` on one element has
shape (m, Np) and a batched state has shape (m, K, Np).
"""
import logging

import numpy as np

from .exceptions import ConfigurationError, MaterialError, ShapeError

logger = logging.getLogger(__name__)


class WeightTable(object):
    """Scalar ``[K, Nq]`` or matrix ``[K, Nq, m, m]`` weights.

    ``w_min``/``w_max`` bound the pointwise eigenvalues of W and
    ``inv_min``/``inv_max`` those of W^-1.
    """

    def __init__(self, values, ref, J=None, element_constant=None):
        values = np.asarray(values, dtype=float)
        if values.ndim not in (2, 4) or values.shape[1] != ref.Nq:
            raise ShapeError('weights must have shape (K, %d) or '
                             '(K, %d, m, m), got %s'
                             % (ref.Nq, ref.Nq, values.shape))
        if values.ndim == 4 and values.shape[2] != values.shape[3]:
            raise ShapeError('matrix weights must be square')
        self.values = values
        self.ref = ref
        self.K = values.shape[0]
        self.scalar = values.ndim == 2
        self.m = 1 if self.scalar else values.shape[2]
        self.J = np.ones(self.K) if J is None else np.asarray(J, float)
        if self.J.shape != (self.K,):
            raise ShapeError('J must have one entry per element')

        if self.scalar:
            eig = values
        else:
            if not np.allclose(values, np.swapaxes(values, 2, 3),
                               rtol=1e-12, atol=0.0):
                raise MaterialError('matrix weights must be symmetric')
            eig = np.linalg.eigvalsh(values)
        self.w_min = float(eig.min())
        self.w_max = float(eig.max())
        if not (np.isfinite(self.w_max) and self.w_min > 0.0):
            raise MaterialError('weights are not positive definite '
                                '(smallest eigenvalue %g)' % self.w_min)
        self.inv_min = 1.0 / self.w_max
        self.inv_max = 1.0 / self.w_min

        if element_constant is None:
            element_constant = bool(np.all(values == values[:, :1]))
        self.element_constant = element_constant

    def __repr__(self):
        return '<WeightTable K=%d m=%d scalar=%s>' % (self.K, self.m,
                                                      self.scalar)

    def at(self, k):
        return self.values[k]

    def inverse(self):
        if self.scalar:
            values = 1.0 / self.values
        else:
            values = np.linalg.inv(self.values)
            values = 0.5 * (values + np.swapaxes(values, 2, 3))
        return WeightTable(values, self.ref, J=self.J,
                           element_constant=self.element_constant)

    def pointwise(self, k, uq):
        """W(x_q) applied to samples ``uq`` of shape (Nq, m)."""
        if self.scalar:
            return self.values[k][:, None] * uq
        return np.einsum('qij,qj->qi', self.values[k], uq)


def _block(table, u):
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[None, :]
    if u.shape != (table.m, table.ref.Np) and not \
            (table.scalar and u.shape[1] == table.ref.Np):
        raise ShapeError('expected a (%d, %d) block, got %s'
                         % (table.m, table.ref.Np, u.shape))
    return u


def apply_weighted_mass(table, k, u):
    """M_W u on element k by quadrature."""
    ref = table.ref
    u = _block(table, u)
    uq = ref.Vq @ u.T
    wuq = table.pointwise(k, uq) * ref.quad_weights[:, None]
    return table.J[k] * (ref.Vq.T @ wuq).T


def apply_wadg_inverse(table, k, r):
    """Weight-adjusted inverse of M_W applied to a weak-form residual.

    ``table`` holds W^-1.  Realised as P_q[W^-1 V_q (1/J) M^-1 r].
    """
    if table is None:
        raise ConfigurationError('no weight table has been built')
    ref = table.ref
    r = _block(table, r)
    y = (ref.mass_inv @ r.T) / table.J[k]
    return (ref.Pq @ table.pointwise(k, ref.Vq @ y)).T


def apply_T_W(table, k, u):
    """L2 projection of the pointwise product W u."""
    ref = table.ref
    u = _block(table, u)
    return (ref.Pq @ table.pointwise(k, ref.Vq @ u.T)).T


def apply_T_W_inverse(table, k, u):
    """Inverse of T_W by a dense solve of the weighted Gram system."""
    ref = table.ref
    u = _block(table, u)
    MW = assemble_weighted_mass(table, k) / table.J[k]
    rhs = (ref.mass @ u.T).T.ravel()
    return np.linalg.solve(MW, rhs).reshape(u.shape)


def project_weighted(table, u):
    """T_W on every element at once; ``u`` has shape (m, K, Np)."""
    ref = table.ref
    u = np.asarray(u)
    if u.shape[1:] != (table.K, ref.Np) or \
            (not table.scalar and u.shape[0] != table.m):
        raise ShapeError('expected shape (%d, %d, %d), got %s'
                         % (table.m, table.K, ref.Np, u.shape))
    if table.element_constant:
        W = table.values[:, 0]
        if table.scalar:
            return u * W[None, :, None]
        return np.einsum('kij,jkn->ikn', W, u)
    uq = np.einsum('qn,fkn->fkq', ref.Vq, u)
    if table.scalar:
        wuq = uq * table.values[None]
    else:
        wuq = np.einsum('kqij,jkq->ikq', table.values, uq)
    return np.einsum('nq,fkq->fkn', ref.Pq, wuq)


# Dense operators below are oracles for tests and diagnostics only.

def assemble_weighted_mass(table, k):
    """Dense block matrix M_W on element k, shape (m Np, m Np)."""
    ref = table.ref
    Np = ref.Np
    Vq = ref.Vq
    w = ref.quad_weights * table.J[k]
    W = table.values[k]
    if table.scalar:
        return Vq.T @ ((w * W)[:, None] * Vq)
    out = np.empty((table.m * Np, table.m * Np))
    for i in range(table.m):
        for j in range(table.m):
            out[i * Np:(i + 1) * Np, j * Np:(j + 1) * Np] = \
                Vq.T @ ((w * W[:, i, j])[:, None] * Vq)
    return out


def dense_wadg_inverse(table, k, r):
    """Exact M_W^-1 r, with ``table`` holding W itself."""
    r = _block(table, r)
    return np.linalg.solve(assemble_weighted_mass(table, k),
                           r.ravel()).reshape(r.shape)


def t_w_inverse_norm(table, k, iterations=200, seed=0):
    """Power-iteration estimate of the L2 operator norm of T_W^-1."""
    ref = table.ref
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((table.m, ref.Np))
    mass = np.kron(np.eye(table.m), ref.mass)

    def norm(x):
        x = x.ravel()
        return float(np.sqrt(x @ mass @ x))

    u /= norm(u)
    value = 0.0
    for _ in range(iterations):
        z = apply_T_W_inverse(table, k, u)
        value = norm(z)
        u = z / value
    return value
