"""
Analytic plane waves of the first-order poroelastic system.

A mode is ``Re R exp(i(omega t - k.x))``; substituting into
Q_t + A Q_x + B Q_y + C Q_z = E Q gives the eigenproblem
``omega R = (A kx + B ky + C kz - i E) R``.  Decaying modes have
Im(omega) > 0.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.linalg import LinAlgError, eig

from .exceptions import EigenSolveError, ModeSelectionError
from .field_map import FIELD_INDEX, embed_points
from .material import system_matrices

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-10
MODE_NAMES = ('fast_p', 'shear', 'slow_p')
DESIGNATED = {'fast_p': FIELD_INDEX['tau11'], 'shear': FIELD_INDEX['tau22'],
              'slow_p': FIELD_INDEX['p']}
AMPLITUDE = 100.0
SOLID_VELOCITY = slice(7, 10)
FLUID_VELOCITY = slice(10, 13)


def _wavevector(k):
    k = np.asarray(k, dtype=float).ravel()
    if k.size > 3:
        raise ValueError('wavevector needs at most 3 components')
    out = np.zeros(3)
    out[:k.size] = k
    return out


@dataclass
class SymbolMatrix:
    matrix: np.ndarray
    k: np.ndarray
    viscous: bool
    name: str = 'symbol'


def build_symbol(material, k, viscous=True):
    """A kx + B ky + C kz - i E for a 3D wavevector."""
    k = _wavevector(k)
    blocks = system_matrices(material).blocks
    matrix = (k[0] * blocks['A'] + k[1] * blocks['B']
              + k[2] * blocks['C']).astype(complex)
    if viscous:
        matrix = matrix - 1j * blocks['D']
    label = 'symbol(%s, k=%s)' % (material.name or 'material',
                                  np.array2string(k, precision=4))
    return SymbolMatrix(matrix=matrix, k=k, viscous=bool(viscous),
                        name=label)


def eigensolve(symbol):
    """Full complex eigendecomposition with a residual check per pair."""
    if isinstance(symbol, SymbolMatrix):
        matrix, name = symbol.matrix, symbol.name
    else:
        matrix, name = np.asarray(symbol), 'matrix'
    try:
        values, vectors = eig(matrix)
    except (LinAlgError, ValueError) as exc:
        raise EigenSolveError('eigensolve of %s failed: %s' % (name, exc),
                              matrix=name)
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    scale = np.linalg.norm(matrix, 2)
    residual = np.linalg.norm(matrix @ vectors - vectors * values, axis=0)
    worst = int(np.argmax(residual))
    if residual[worst] > RESIDUAL_TOLERANCE * scale:
        raise EigenSolveError(
            'eigenpair %d of %s has residual %.3e (limit %.3e)'
            % (worst, name, residual[worst], RESIDUAL_TOLERANCE * scale),
            matrix=name)
    return values, vectors


@dataclass
class Mode:
    name: str
    omega: complex
    vector: np.ndarray
    k: np.ndarray

    @property
    def speed(self):
        return self.omega.real / np.linalg.norm(self.k)


def _is_p_type(vector, khat):
    solid = vector[SOLID_VELOCITY]
    if np.linalg.norm(solid) <= 1e-12 * np.linalg.norm(vector[7:]):
        solid = vector[FLUID_VELOCITY]
    norm = np.linalg.norm(solid)
    if norm == 0.0:
        return False
    return abs(np.vdot(solid, khat)) / norm >= math.cos(math.pi / 4)


def _normalise(name, vector):
    index = DESIGNATED[name]
    if abs(vector[index]) <= 1e-8 * np.max(np.abs(vector)):
        index = int(np.argmax(np.abs(vector)))
    return vector * (AMPLITUDE / vector[index])


def _clusters(speeds, order):
    groups = []
    for i in order:
        if groups and abs(speeds[i] - speeds[groups[-1][0]]) <= \
                1e-6 * abs(speeds[groups[-1][0]]):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def select_modes(pairs, k, fields=None):
    """Fast P, S and slow P eigenmodes of a symbol.

    ``fields`` restricts the search to eigenvectors supported on that
    subset of state fields.  Each returned vector is scaled so its
    designated component equals 100: tau11 for fast P, tau22 for S and p
    for slow P.  The pressure slot is used for slow P because tau23
    vanishes for in-plane wavevectors.  A vanishing designated component
    falls back to the largest one.
    """
    values, vectors = pairs
    k = _wavevector(k)
    knorm = np.linalg.norm(k)
    if knorm == 0.0:
        raise ModeSelectionError('modes are undefined for k = 0')
    khat = k / knorm
    scale = max(np.max(np.abs(values)), 1e-300)
    tol = 1e-8 * scale

    keep = np.ones(len(values), dtype=bool)
    if fields is not None:
        other = np.setdiff1d(np.arange(vectors.shape[0]), list(fields))
        keep &= np.linalg.norm(vectors[other], axis=0) <= 1e-8

    propagating = np.flatnonzero(keep & (values.real > tol))
    speeds = values.real / knorm
    order = propagating[np.argsort(-speeds[propagating])]
    p_groups = []
    s_groups = []
    for group in _clusters(speeds, order):
        if _is_p_type(vectors[:, group[0]], khat):
            p_groups.append(group)
        else:
            s_groups.append(group)

    if not p_groups:
        raise ModeSelectionError('no compressional mode found')
    if not s_groups:
        raise ModeSelectionError('no shear mode found')
    fast = p_groups[0][0]
    shear = s_groups[0][0]
    if len(p_groups) > 1:
        slow = p_groups[-1][0]
    else:
        diffusive = [i for i in np.flatnonzero(keep)
                     if abs(values[i].real) <= tol and abs(values[i]) > tol
                     and _is_p_type(vectors[:, i], khat)]
        if not diffusive:
            raise ModeSelectionError('no slow compressional mode found')
        slow = min(diffusive, key=lambda i: abs(values[i]))
        logger.debug('slow P mode is overdamped (omega = %s)', values[slow])

    if not speeds[fast] > speeds[shear] > speeds[slow]:
        raise ModeSelectionError(
            'ambiguous mode ordering: fast P %.6g, S %.6g, slow P %.6g'
            % (speeds[fast], speeds[shear], speeds[slow]))
    return [Mode(name=name, omega=complex(values[i]),
                 vector=_normalise(name, vectors[:, i].copy()), k=k.copy())
            for name, i in zip(MODE_NAMES, (fast, shear, slow))]


class PlaneWaveSolution(object):
    """Superposition of plane-wave modes, evaluated on mesh coordinates.

    2D coordinates are embedded in 3D through ``plane``.
    """

    def __init__(self, modes, plane='xy', amplitudes=None):
        self.modes = list(modes)
        self.plane = plane
        if amplitudes is None:
            amplitudes = np.ones(len(self.modes))
        self.amplitudes = np.asarray(amplitudes, dtype=complex)

    def __repr__(self):
        return '<PlaneWaveSolution %s>' % ', '.join(m.name
                                                    for m in self.modes)

    def _phases(self, points, t):
        x = embed_points(points, self.plane)
        return [gamma * np.exp(1j * (mode.omega * t - x @ mode.k))
                for gamma, mode in zip(self.amplitudes, self.modes)]

    def evaluate(self, points, t):
        """Field values, shape (13, npts)."""
        total = 0.0
        for mode, phase in zip(self.modes, self._phases(points, t)):
            total = total + np.outer(mode.vector, phase)
        return np.real(total)

    def __call__(self, points, t):
        return self.evaluate(points, t)

    def rate(self, points, t):
        total = 0.0
        for mode, phase in zip(self.modes, self._phases(points, t)):
            total = total + np.outer(1j * mode.omega * mode.vector, phase)
        return np.real(total)

    def gradient(self, points, t):
        """Spatial derivatives, shape (3, 13, npts)."""
        total = 0.0
        for mode, phase in zip(self.modes, self._phases(points, t)):
            total = total + np.einsum('a,i,p->aip', -1j * mode.k,
                                      mode.vector, phase)
        return np.real(total)


def plane_wave_solution(material, k, viscous=True, plane='xy', fields=None,
                        modes=MODE_NAMES):
    """Superposed fast P, S and slow P waves sharing one wavevector."""
    k3 = embed_points(np.atleast_2d(np.asarray(k, dtype=float)), plane)[0]
    symbol = build_symbol(material, k3, viscous)
    if fields is None:
        pairs = eigensolve(symbol)
    else:
        pairs = eigensolve_subset(symbol, fields)
    selected = [m for m in select_modes(pairs, k3, fields)
                if m.name in modes]
    return PlaneWaveSolution(selected, plane=plane)


def eigensolve_subset(symbol, fields):
    """Eigenpairs of the symbol restricted to a decoupled field subset.

    Vectors are returned in the full 13-field layout, zero elsewhere.
    """
    fields = list(fields)
    sub = SymbolMatrix(matrix=symbol.matrix[np.ix_(fields, fields)],
                       k=symbol.k, viscous=symbol.viscous,
                       name=symbol.name + '[subset]')
    values, sub_vectors = eigensolve(sub)
    vectors = np.zeros((symbol.matrix.shape[0], len(values)), dtype=complex)
    vectors[fields] = sub_vectors
    return values, vectors


def ricker(t, f0, t0=0.0):
    """Ricker wavelet with peak frequency ``f0`` centred at ``t0``."""
    arg = (math.pi * f0 * (np.asarray(t, dtype=float) - t0)) ** 2
    return (1.0 - 2.0 * arg) * np.exp(-arg)


def center_of_mass_velocity(v, q, rho, rho_f):
    return np.asarray(v) + (rho_f / rho) * np.asarray(q)


@dataclass
class DispersionRow:
    angle: float
    mode: str
    phase_velocity: float
    attenuation: float
    wavenumber: Any = None


def dispersion_sweep(material, angles=19, frequency=100.0, plane='xz',
                     viscous=True, max_iterations=50, tolerance=1e-10):
    """Phase velocity and attenuation per mode over propagation angles.

    Angles run from the first to the second in-plane axis.  For each
    mode the wavenumber is iterated until Re(omega) = 2 pi f; the
    attenuation is Im(omega) over the phase velocity.
    """
    target = 2.0 * math.pi * frequency
    rows = []
    for angle in np.linspace(0.0, 90.0, angles):
        theta = math.radians(angle)
        direction = embed_points([[math.cos(theta), math.sin(theta)]],
                                 plane)[0]
        for name in MODE_NAMES:
            row = _track_mode(material, direction, name, target, viscous,
                              max_iterations, tolerance)
            if row is None:
                logger.warning('no %s mode at %.1f degrees', name, angle)
                rows.append(DispersionRow(angle, name, float('nan'),
                                          float('nan')))
                continue
            speed, attenuation, knorm = row
            rows.append(DispersionRow(angle, name, speed, attenuation,
                                      knorm))
    return rows


def _track_mode(material, direction, name, target, viscous, max_iterations,
                tolerance):
    try:
        pairs = eigensolve(build_symbol(material, direction, False))
        mode = _named(select_modes(pairs, direction), name)
    except (ModeSelectionError, EigenSolveError):
        return None
    knorm = target / mode.speed
    for _ in range(max_iterations):
        k = knorm * direction
        try:
            pairs = eigensolve(build_symbol(material, k, viscous))
            mode = _named(select_modes(pairs, k), name)
        except (ModeSelectionError, EigenSolveError):
            return None
        if mode.omega.real <= 0.0:
            return None
        update = knorm * target / mode.omega.real
        done = abs(update - knorm) <= tolerance * knorm
        knorm = update
        if done:
            break
    k = knorm * direction
    pairs = eigensolve(build_symbol(material, k, viscous))
    mode = _named(select_modes(pairs, k), name)
    speed = mode.omega.real / knorm
    return speed, mode.omega.imag / speed, knorm


def _named(modes, name):
    for mode in modes:
        if mode.name == name:
            return mode
    raise ModeSelectionError('mode %s not found' % name)
