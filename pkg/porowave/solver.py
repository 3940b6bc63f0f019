"""
Semi-discrete DG operator, energy, time-step estimate and time stepping.

State arrays are laid out ``(fields, K, Np)`` over the active fields of
the run mode; stress fields come first, then velocities.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, List

import numpy as np

from .exceptions import ConfigurationError, ShapeError, SolverDivergedError
from .field_map import (FIELD_INDEX, NSTRESS, STATE_FIELDS, active_fields,
                        mesh_axes)
from .material import A_MATRICES, CoefficientTables, evaluate_field
from .mesh import BoundaryTag
from .planewave import ricker
from .refelem import quadrature_project
from .wadg import WeightTable, project_weighted

logger = logging.getLogger(__name__)

SCHEMES = ('unified', 'strang')
MODES = ('full13', 'compact2d')

# Carpenter-Kennedy low-storage RK4(5).
_RK4A = (0.0,
         -567301805773.0 / 1357537059087.0,
         -2404267990393.0 / 2016746695238.0,
         -3550918686646.0 / 2091501179385.0,
         -1275806237668.0 / 842570457699.0)
_RK4B = (1432997174477.0 / 9575080441755.0,
         5161836677717.0 / 13612068292357.0,
         1720146321549.0 / 2090206949498.0,
         3134564353537.0 / 4481467310338.0,
         2277821191437.0 / 14882151754819.0)
_RK4C = (0.0,
         1432997174477.0 / 9575080441755.0,
         2526269341429.0 / 6820363962896.0,
         2006345519317.0 / 3224310063776.0,
         2802321613138.0 / 2924317926251.0)


def normal_matrix(n):
    """A_n = sum_i n_i A_i for a unit normal with up to 3 components."""
    n = np.asarray(n, dtype=float).ravel()
    return np.einsum('a,aij->ij', n, A_MATRICES[:len(n)])


def trace_constant(dim, N):
    if dim == 2:
        return (N + 1) * (N + 2) / 2.0
    return (N + 1) * (N + 3) / 3.0


class Ricker(object):
    def __init__(self, f0, t0=None):
        if f0 <= 0.0:
            raise ConfigurationError('Ricker frequency must be positive')
        self.f0 = float(f0)
        self.t0 = 1.2 / f0 if t0 is None else float(t0)

    def __call__(self, t):
        return float(ricker(t, self.f0, self.t0))

    def __repr__(self):
        return 'Ricker(f0=%g, t0=%g)' % (self.f0, self.t0)


@dataclass
class PointSource:
    """Point forcing ``weights * signature(t)`` at ``location``.

    Weights are a 13-vector or a mapping from field name to weight.
    """

    location: Any
    weights: Any
    signature: Callable[[float], float]

    def __post_init__(self):
        self.location = np.asarray(self.location, dtype=float).ravel()
        if isinstance(self.weights, dict):
            vector = np.zeros(len(STATE_FIELDS))
            for name, value in self.weights.items():
                if name not in FIELD_INDEX:
                    raise ConfigurationError('unknown field "%s" in source '
                                             'weights' % name)
                vector[FIELD_INDEX[name]] = value
            self.weights = vector
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (len(STATE_FIELDS),):
            raise ShapeError('source weights need %d entries'
                             % len(STATE_FIELDS))


@dataclass
class SolverConfig:
    alpha_tau: float = 1.0
    alpha_v: float = 1.0
    cfl: float = 1.0
    scheme: str = 'unified'
    final_time: float = 1.0
    mode: str = 'full13'
    plane: str = 'xy'
    sources: List[PointSource] = field(default_factory=list)
    reference: Any = None
    progress_every: int = 100

    def __post_init__(self):
        if self.alpha_tau < 0.0 or self.alpha_v < 0.0:
            raise ConfigurationError('penalty parameters must be '
                                     'non-negative')
        if not self.cfl > 0.0:
            raise ConfigurationError('cfl must be positive')
        if self.scheme not in SCHEMES:
            raise ConfigurationError('unknown time scheme "%s"'
                                     % self.scheme)
        if self.mode not in MODES:
            raise ConfigurationError('unknown run mode "%s"' % self.mode)


class State(object):
    def __init__(self, values, t=0.0, fields=None):
        self.values = np.asarray(values, dtype=float)
        self.t = float(t)
        if fields is None:
            fields = tuple(range(self.values.shape[0]))
        self.fields = tuple(fields)
        if self.values.ndim != 3 or self.values.shape[0] != len(self.fields):
            raise ShapeError('state values must have shape (%d, K, Np), '
                             'got %s' % (len(self.fields), self.values.shape))

    def __repr__(self):
        return '<State t=%g shape=%s>' % (self.t, self.values.shape)

    def copy(self):
        return State(self.values.copy(), self.t, self.fields)

    def field(self, name):
        return self.values[self.fields.index(FIELD_INDEX[name])]

    def full(self):
        """All 13 fields, zero where inactive."""
        out = np.zeros((len(STATE_FIELDS),) + self.values.shape[1:])
        out[list(self.fields)] = self.values
        return out

    def check_finite(self):
        bad = ~np.isfinite(self.values)
        if bad.any():
            element = int(np.argwhere(bad)[0][1])
            raise SolverDivergedError(element, self.t)


class Discretization(object):
    """DG operator of one mesh, reference element and coefficient field."""

    def __init__(self, mesh, ref, coefficients, config=None):
        if mesh.dim != ref.dim:
            raise ConfigurationError('mesh is %dD but the reference element '
                                     'is %dD' % (mesh.dim, ref.dim))
        if not mesh.connected:
            raise ConfigurationError('mesh faces are not connected')
        self.mesh = mesh
        self.ref = ref
        self.config = config or SolverConfig()
        if isinstance(coefficients, CoefficientTables):
            self.tables = coefficients
        else:
            self.tables = evaluate_field(coefficients, mesh, ref)

        cfg = self.config
        self.fields = active_fields(cfg.mode, cfg.plane, mesh.dim)
        self.axes = mesh_axes(mesh.dim, cfg.plane)
        self.stress = [i for i in self.fields if i < NSTRESS]
        self.velocity = [i - NSTRESS for i in self.fields if i >= NSTRESS]
        self.ns = len(self.stress)
        self.nv = len(self.velocity)
        self.nfields = len(self.fields)
        ix = np.ix_(self.stress, self.velocity)
        self.A = np.stack([A_MATRICES[axis][ix] for axis in self.axes])

        t = self.tables
        sx = np.ix_(self.stress, self.stress)
        vx = np.ix_(self.velocity, self.velocity)
        const = t.element_constant
        self.Ws_inv = WeightTable(t.Qs_inv[:, :, sx[0], sx[1]], ref,
                                  J=mesh.J, element_constant=const)
        self.Wv_inv = WeightTable(t.Qv_inv[:, :, vx[0], vx[1]], ref,
                                  J=mesh.J, element_constant=const)
        self.Qs = t.Qs[:, :, sx[0], sx[1]]
        self.Qv = t.Qv[:, :, vx[0], vx[1]]
        # Fluid-flux fields and their physical directions.
        self.fluid = [p for p, j in enumerate(self.velocity) if j >= 3]
        self.fluid_dirs = [self.velocity[p] - 3 for p in self.fluid]
        self.solid = [self.velocity.index(d) for d in self.fluid_dirs]
        self.decay = t.decay[:, :, self.fluid_dirs]
        self.rate = t.rate[:, :, self.fluid_dirs]
        self.ratio = t.ratio

        self._setup_faces()
        self.sources = []
        for source in cfg.sources:
            self.add_source(source)
        logger.debug('discretization K=%d N=%d fields=%d dofs=%d',
                     mesh.K, ref.N, self.nfields, self.ndofs)

    @property
    def ndofs(self):
        return self.nfields * self.mesh.K * self.ref.Np

    @property
    def shape(self):
        return (self.nfields, self.mesh.K, self.ref.Np)

    def _setup_faces(self):
        mesh = self.mesh
        K, nf = mesh.K, mesh.nfaces
        normals = np.zeros((K, nf, 3))
        normals[:, :, list(self.axes)] = mesh.normals
        self.normals = normals
        self.An = np.einsum('kfa,aij->kfij', mesh.normals, self.A)
        self.perm = mesh.trace_permutation(self.ref)
        interior = mesh.neighbor >= 0
        own = np.broadcast_to(np.arange(K)[:, None], (K, nf))
        own_face = np.broadcast_to(np.arange(nf)[None, :], (K, nf))
        self.nbr = np.where(interior, mesh.neighbor, own)[:, :, None]
        self.nbr_face = np.where(interior, mesh.neighbor_face,
                                 own_face)[:, :, None]
        self.free = mesh.tags == BoundaryTag.FREE
        self.absorbing = mesh.tags == BoundaryTag.ABSORBING
        self.exact = mesh.tags == BoundaryTag.EXACT
        if self.exact.any():
            if self.config.reference is None:
                raise ConfigurationError('exact-solution boundaries need a '
                                         'reference solution')
            pts = np.stack([mesh.map_points(self.ref.face_points[f])
                            for f in range(nf)], axis=1)
            self.exact_faces = np.argwhere(self.exact)
            self.exact_points = pts[self.exact]
        self.lift_scale = mesh.Jf / mesh.J[:, None]

    def zeros(self, t=0.0):
        return State(np.zeros(self.shape), t, self.fields)

    def state(self, values, t=0.0):
        values = np.asarray(values, dtype=float)
        if values.shape[0] == len(STATE_FIELDS) and \
                self.nfields != len(STATE_FIELDS):
            values = values[list(self.fields)]
        return State(values, t, self.fields)

    def quadrature_points(self):
        return self.mesh.map_points(self.ref.quad_points)

    def project(self, function, t=0.0):
        """L2 projection of ``function(points, t) -> (13, npts)``."""
        xq = self.quadrature_points()
        values = np.asarray(function(xq.reshape(-1, self.mesh.dim), t))
        values = values[list(self.fields)].reshape(
            self.nfields, self.mesh.K, self.ref.Nq)
        nodal = quadrature_project(self.ref, np.moveaxis(values, 2, 0))
        return State(np.moveaxis(nodal, 0, 2), t, self.fields)

    def interpolate(self, state, points):
        """All 13 fields at physical points, shape (13, npts)."""
        elements, ref_points = self.mesh.locate(points)
        out = np.zeros((len(STATE_FIELDS), len(elements)))
        for p, (k, r) in enumerate(zip(elements, ref_points)):
            phi = self.ref.interpolation_matrix(r[None, :])[0]
            out[list(self.fields), p] = state.values[:, k, :] @ phi
        return out

    def face_traces(self, values):
        """Interior and exterior face values, each (F, K, nf, Nfq)."""
        inner = np.einsum('fqn,ikn->ikfq', self.ref.Vf, values)
        outer = inner[:, self.nbr, self.nbr_face, self.perm]
        return inner, outer

    def _jumps(self, values, t):
        ns = self.ns
        inner, outer = self.face_traces(values)
        du = outer - inner
        jt = np.einsum('kfij,ikfq->jkfq', self.An, du[:ns])
        jv = np.einsum('kfij,jkfq->ikfq', self.An, du[ns:])

        if self.free.any():
            own = np.einsum('kfij,ikfq->jkfq', self.An, inner[:ns])
            jt[:, self.free] = -2.0 * own[:, self.free]
            jv[:, self.free] = 0.0
        if self.absorbing.any():
            mask = self.absorbing
            An = self.An[mask]
            jt[:, mask] = -np.einsum('mij,imq->jmq', An, inner[:ns][:, mask])
            jv[:, mask] = -np.einsum('mij,jmq->imq', An, inner[ns:][:, mask])
        if self.exact.any():
            npts = self.exact_points.shape[:2]
            ref_values = np.asarray(self.config.reference(
                self.exact_points.reshape(-1, self.mesh.dim), t))
            ext = ref_values[list(self.fields)].reshape(
                (self.nfields,) + npts)
            d = ext - inner[:, self.exact]
            An = self.An[self.exact]
            jt[:, self.exact] = np.einsum('mij,imq->jmq', An, d[:ns])
            jv[:, self.exact] = np.einsum('mij,jmq->imq', An, d[ns:])
        return jt, jv

    def residual(self, values, t, dissipation=True, sources=True):
        """Strong-form residual before the weight-adjusted inverse."""
        ref = self.ref
        ns = self.ns
        mesh = self.mesh
        dr = np.einsum('bnm,fkm->bfkn', ref.D, values)
        grad = np.einsum('kba,bfkn->afkn', mesh.rx, dr)
        r = np.empty_like(values)
        r[:ns] = np.einsum('aij,ajkn->ikn', self.A, grad[:, ns:])
        r[ns:] = np.einsum('aji,ajkn->ikn', self.A, grad[:, :ns])

        jt, jv = self._jumps(values, t)
        cfg = self.config
        flux_tau = 0.5 * jv + 0.5 * cfg.alpha_tau * np.einsum(
            'kfij,jkfq->ikfq', self.An, jt)
        flux_v = 0.5 * jt + 0.5 * cfg.alpha_v * np.einsum(
            'kfij,ikfq->jkfq', self.An, jv)
        lift = ref.lift_quadrature
        r[:ns] += np.einsum('fnq,kf,ikfq->ikn', lift, self.lift_scale,
                            flux_tau)
        r[ns:] += np.einsum('fnq,kf,ikfq->ikn', lift, self.lift_scale,
                            flux_v)

        if dissipation and self.fluid:
            q = values[[ns + p for p in self.fluid]]
            if self.tables.element_constant:
                dq = q * np.moveaxis(self.decay[:, 0, :], 1, 0)[:, :, None]
            else:
                qq = np.einsum('qn,fkn->fkq', ref.Vq, q)
                dq = np.einsum('nq,fkq->fkn', ref.Pq,
                               qq * np.moveaxis(self.decay, 2, 0))
            r[[ns + p for p in self.fluid]] += dq

        if sources:
            for source in self.sources:
                r += self._source_residual(source, t)
        return r

    def apply_mass_inverse(self, r):
        out = np.empty_like(r)
        out[:self.ns] = project_weighted(self.Ws_inv, r[:self.ns])
        out[self.ns:] = project_weighted(self.Wv_inv, r[self.ns:])
        return out

    def rhs(self, state, t=None, dissipation=True, sources=True):
        """Time derivative of a State (or raw values) at time t."""
        if isinstance(state, State):
            values, t = state.values, state.t if t is None else t
        else:
            values, t = state, 0.0 if t is None else t
        return self.apply_mass_inverse(
            self.residual(values, t, dissipation, sources))

    # Point sources

    def add_source(self, source):
        location = source.location[:self.mesh.dim]
        elements, ref_points = self.mesh.locate(location[None, :])
        k = int(elements[0])
        phi = self.ref.interpolation_matrix(ref_points)[0]
        lifted = self.ref.mass_inv @ phi / self.mesh.J[k]
        weights = source.weights[list(self.fields)]
        self.sources.append((source, k, lifted, weights))
        logger.debug('point source at %s in element %d', location, k)

    def _source_residual(self, entry, t):
        source, k, lifted, weights = entry
        r = np.zeros(self.shape)
        g = source.signature(t)
        if g != 0.0:
            r[:, k, :] = np.outer(weights, lifted) * g
        return r

    def point_source_residual(self, source, t):
        self.add_source(source)
        entry = self.sources.pop()
        return self._source_residual(entry, t)

    def inject_point_source(self, source, t):
        """Additive RHS contribution of one point source."""
        return self.apply_mass_inverse(self.point_source_residual(source, t))

    # Diagnostics

    def energy(self, state):
        values = state.values if isinstance(state, State) else state
        ref = self.ref
        uq = np.einsum('qn,fkn->fkq', ref.Vq, values)
        tau, vel = uq[:self.ns], uq[self.ns:]
        density = (np.einsum('ikq,kqij,jkq->kq', tau, self.Qs, tau)
                   + np.einsum('ikq,kqij,jkq->kq', vel, self.Qv, vel))
        return 0.5 * float(np.sum(self.mesh.J[:, None] * density
                                  * ref.quad_weights))

    def estimate_dt(self, cfl=None):
        cfl = self.config.cfl if cfl is None else cfl
        c_n = trace_constant(self.mesh.dim, self.ref.N)
        surface = np.max(self.mesh.Jf, axis=1) / self.mesh.J
        return float(np.min(cfl / (self.tables.speed * c_n * surface)))

    def diffusive_update(self, state, dt):
        """Exact flow of the dissipative part over dt, node by node."""
        out = state.copy()
        if not self.fluid:
            return out
        ns = self.ns
        lam = np.moveaxis(self.rate, 2, 0)
        q_idx = [ns + p for p in self.fluid]
        v_idx = [ns + p for p in self.solid]
        q_old = state.values[q_idx]
        growth = np.expm1(lam * dt)
        out.values[q_idx] = q_old + growth * q_old
        out.values[v_idx] = state.values[v_idx] - \
            self.ratio[None] * growth * q_old
        return out


def stiffness_report(tables):
    """Largest spectral norm of Q_v^-1 D over all quadrature points."""
    return float(np.max(np.linalg.norm(tables.Qv_inv_D, ord=2,
                                       axis=(-2, -1))))


class TimeStepper(object):
    """Low-storage RK4(5), optionally Strang-split around the dissipation."""

    def __init__(self, disc, scheme=None):
        self.disc = disc
        self.scheme = scheme or disc.config.scheme
        if self.scheme not in SCHEMES:
            raise ConfigurationError('unknown time scheme "%s"'
                                     % self.scheme)

    def _lsrk(self, state, dt, dissipation):
        y = state.values.copy()
        k = np.zeros_like(y)
        t = state.t
        for a, b, c in zip(_RK4A, _RK4B, _RK4C):
            k = a * k + dt * self.disc.rhs(y, t + c * dt,
                                           dissipation=dissipation)
            y += b * k
        return State(y, t + dt, state.fields)

    def step_unified(self, state, dt):
        return self._lsrk(state, dt, dissipation=True)

    def step_strang(self, state, dt):
        half = self.disc.diffusive_update(state, 0.5 * dt)
        mid = self._lsrk(half, dt, dissipation=False)
        return self.disc.diffusive_update(mid, 0.5 * dt)

    def step(self, state, dt):
        if not dt > 0.0:
            raise ConfigurationError('time step must be positive')
        if self.scheme == 'strang':
            new = self.step_strang(state, dt)
        else:
            new = self.step_unified(state, dt)
        new.check_finite()
        return new

    def advance(self, state, t_end, dt=None, callback=None,
                progress_every=None):
        """Step to ``t_end`` in equal steps no longer than ``dt``."""
        dt = dt or self.disc.estimate_dt()
        progress_every = progress_every or self.disc.config.progress_every
        nsteps = int(np.ceil((t_end - state.t) / dt - 1e-12))
        if nsteps <= 0:
            return state
        dt = (t_end - state.t) / nsteps
        logger.info('advancing %d steps of dt=%.6e to t=%.6e (%s)',
                    nsteps, dt, t_end, self.scheme)
        for step in range(1, nsteps + 1):
            state = self.step(state, dt)
            if callback is not None:
                callback(step, state)
            if step % progress_every == 0 or step == nsteps:
                logger.info('step %d t=%.6e dt=%.3e energy=%.6e', step,
                            state.t, dt, self.disc.energy(state))
        return state
