"""
Poroelastic materials, Biot coefficients and the system matrices.

Stress vector order is tau11 tau22 tau33 tau23 tau13 tau12 p and velocity
order v1 v2 v3 q1 q2 q3.  The drained stiffness uses Voigt order
11 22 33 23 13 12.  Everything is SI unless a material has been passed
through :func:`nondimensionalize`.
"""
import dataclasses
import logging
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import (FieldEvaluationError, IndefiniteHessianError,
                         MaterialError, UnknownPresetError)

logger = logging.getLogger(__name__)

GPA = 1.0e9
MILLI = 1.0e-3
NANO_DARCY = 1.0e-15

STIFFNESS_KEYS = ('c11', 'c12', 'c13', 'c22', 'c23', 'c33', 'c44', 'c55',
                  'c66')

# Constant coupling matrices; A_i maps velocity gradients in direction i
# onto the stress rates.
A_MATRICES = np.zeros((3, 7, 6))
A_MATRICES[0, 0, 0] = 1.0
A_MATRICES[0, 4, 2] = 1.0
A_MATRICES[0, 5, 1] = 1.0
A_MATRICES[0, 6, 3] = -1.0
A_MATRICES[1, 1, 1] = 1.0
A_MATRICES[1, 3, 2] = 1.0
A_MATRICES[1, 5, 0] = 1.0
A_MATRICES[1, 6, 4] = -1.0
A_MATRICES[2, 2, 2] = 1.0
A_MATRICES[2, 3, 1] = 1.0
A_MATRICES[2, 4, 0] = 1.0
A_MATRICES[2, 6, 5] = -1.0
A_MATRICES.setflags(write=False)


@dataclass(frozen=True)
class PoroelasticMaterial:
    """Raw rock and fluid properties of one medium."""

    K_s: float
    rho_s: float
    c11: float
    c12: float
    c13: float
    c22: float
    c23: float
    c33: float
    c44: float
    c55: float
    c66: float
    phi: float
    kappa: Tuple[float, float, float]
    T: Tuple[float, float, float]
    K_f: float
    rho_f: float
    eta: float
    name: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'kappa', _triple(self.kappa, 'kappa'))
        object.__setattr__(self, 'T', _triple(self.T, 'T'))
        for key in ('K_s', 'rho_s', 'K_f', 'rho_f') + STIFFNESS_KEYS:
            value = getattr(self, key)
            if not (np.isfinite(value) and value > 0.0):
                raise MaterialError('%s must be positive, got %r'
                                    % (key, value))
        if not 0.0 < self.phi < 1.0:
            raise MaterialError('porosity must lie in (0, 1), got %r'
                                % self.phi)
        for i in range(3):
            if not self.kappa[i] > 0.0:
                raise MaterialError('kappa%d must be positive' % (i + 1))
            if not self.T[i] >= 1.0:
                raise MaterialError('T%d must be at least 1' % (i + 1))
        if not self.eta >= 0.0:
            raise MaterialError('viscosity must be non-negative')

    @classmethod
    def transverse(cls, K_s, rho_s, c11, c12, c13, c33, c55, phi, kappa1,
                   kappa3, T1, T3, K_f, rho_f, eta, name=''):
        """Transversely isotropic medium with symmetry axis 3."""
        return cls(K_s=K_s, rho_s=rho_s, c11=c11, c12=c12, c13=c13,
                   c22=c11, c23=c13, c33=c33, c44=c55, c55=c55,
                   c66=(c11 - c12) / 2.0, phi=phi,
                   kappa=(kappa1, kappa1, kappa3), T=(T1, T1, T3), K_f=K_f,
                   rho_f=rho_f, eta=eta, name=name)

    @classmethod
    def isotropic(cls, K_s, rho_s, K_fr, mu_fr, phi, kappa, T, K_f, rho_f,
                  eta, name=''):
        c11 = K_fr + 4.0 * mu_fr / 3.0
        c12 = K_fr - 2.0 * mu_fr / 3.0
        return cls(K_s=K_s, rho_s=rho_s, c11=c11, c12=c12, c13=c12,
                   c22=c11, c23=c12, c33=c11, c44=mu_fr, c55=mu_fr,
                   c66=mu_fr, phi=phi, kappa=(kappa,) * 3, T=(T,) * 3,
                   K_f=K_f, rho_f=rho_f, eta=eta, name=name)

    @property
    def stiffness(self):
        C = np.zeros((6, 6))
        C[0, 0], C[1, 1], C[2, 2] = self.c11, self.c22, self.c33
        C[0, 1] = C[1, 0] = self.c12
        C[0, 2] = C[2, 0] = self.c13
        C[1, 2] = C[2, 1] = self.c23
        C[3, 3], C[4, 4], C[5, 5] = self.c44, self.c55, self.c66
        return C

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def inviscid(self):
        return self.replace(eta=0.0)

    def scale_densities(self, factor):
        return self.replace(rho_s=self.rho_s * factor,
                            rho_f=self.rho_f * factor)


def _triple(values, label):
    if np.isscalar(values):
        values = (values,)
    values = tuple(float(v) for v in values)
    if len(values) == 1:
        return values * 3
    if len(values) == 2:
        return (values[0], values[0], values[1])
    if len(values) != 3:
        raise MaterialError('%s needs 1 to 3 entries' % label)
    return values


@dataclass(frozen=True)
class DerivedCoefficients:
    rho: float
    rho_f: float
    m: Tuple[float, float, float]
    beta: Tuple[float, float, float]
    alpha: Tuple[float, float, float]
    M: float
    K_star: float
    omega_c: float
    eta: float
    kappa: Tuple[float, float, float]


def derive(material):
    """Biot-Willis coefficients, densities and the viscous cutoff."""
    mat = material
    rho = (1.0 - mat.phi) * mat.rho_s + mat.phi * mat.rho_f
    m = tuple(T * mat.rho_f / mat.phi for T in mat.T)
    beta = tuple(rho * mi - mat.rho_f ** 2 for mi in m)
    for i, b in enumerate(beta):
        if b <= 0.0:
            raise MaterialError(
                'non-physical material: rho*m%d - rho_f^2 = %g <= 0 in '
                'direction %d' % (i + 1, b, i + 1), direction=i + 1)

    C = mat.stiffness
    alpha = tuple(1.0 - C[i, :3].sum() / (3.0 * mat.K_s) for i in range(3))
    for i, a in enumerate(alpha):
        if not 0.0 < a <= 1.0:
            raise MaterialError(
                'Biot coefficient alpha%d = %g outside (0, 1]' % (i + 1, a),
                direction=i + 1)
    K_star = (mat.c11 + mat.c22 + mat.c33
              + 2.0 * (mat.c12 + mat.c13 + mat.c23)) / 9.0
    denom = (1.0 - K_star / mat.K_s) - mat.phi * (1.0 - mat.K_s / mat.K_f)
    if denom <= 0.0:
        raise MaterialError('non-physical material: Biot modulus is not '
                            'positive')
    M = mat.K_s / denom
    if mat.eta == 0.0:
        omega_c = 0.0
    else:
        omega_c = min(mat.eta * mat.phi / (mat.rho_f * T * k)
                      for T, k in zip(mat.T, mat.kappa))
    return DerivedCoefficients(rho=rho, rho_f=mat.rho_f, m=m, beta=beta,
                               alpha=alpha, M=M, K_star=K_star,
                               omega_c=omega_c, eta=mat.eta,
                               kappa=mat.kappa)


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    Qs: np.ndarray
    Qs_inv: np.ndarray
    Qv: np.ndarray
    Qv_inv: np.ndarray
    D: np.ndarray
    S: np.ndarray
    alpha: np.ndarray
    A: np.ndarray
    blocks: dict

    @property
    def Qv_inv_D(self):
        return self.Qv_inv @ self.D

    def hessian(self):
        """blockdiag(Q_s, Q_v)."""
        H = np.zeros((13, 13))
        H[:7, :7] = self.Qs
        H[7:, 7:] = self.Qv
        return H


def _require_spd(matrix, label):
    try:
        np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise IndefiniteHessianError('indefinite Hessian: %s is not '
                                     'positive definite' % label)


def assemble_system(derived, stiffness):
    """Symmetric-form matrices plus the first-order system blocks."""
    C = np.asarray(stiffness, dtype=float)
    M = derived.M
    alpha = np.zeros(6)
    alpha[:3] = derived.alpha
    try:
        factor = cho_factor(C)
    except LinAlgError:
        raise IndefiniteHessianError('indefinite Hessian: drained '
                                     'stiffness is not positive definite')
    S = cho_solve(factor, np.eye(6))
    S = 0.5 * (S + S.T)

    Qs = np.empty((7, 7))
    Qs[:6, :6] = S
    Qs[:6, 6] = Qs[6, :6] = S @ alpha
    Qs[6, 6] = 1.0 / M + alpha @ S @ alpha

    Qs_inv = np.empty((7, 7))
    Qs_inv[:6, :6] = C + M * np.outer(alpha, alpha)
    Qs_inv[:6, 6] = Qs_inv[6, :6] = -M * alpha
    Qs_inv[6, 6] = M

    rho, rho_f = derived.rho, derived.rho_f
    Qv = np.zeros((6, 6))
    Qv_inv = np.zeros((6, 6))
    D = np.zeros((6, 6))
    for i in range(3):
        m, b = derived.m[i], derived.beta[i]
        Qv[i, i] = rho
        Qv[i, 3 + i] = Qv[3 + i, i] = rho_f
        Qv[3 + i, 3 + i] = m
        Qv_inv[i, i] = m / b
        Qv_inv[i, 3 + i] = Qv_inv[3 + i, i] = -rho_f / b
        Qv_inv[3 + i, 3 + i] = rho / b
        D[3 + i, 3 + i] = -derived.eta / derived.kappa[i]

    _require_spd(Qs, 'Q_s')
    _require_spd(Qv, 'Q_v')

    blocks = first_order_blocks(derived, C)
    matrices = SystemMatrices(Qs=Qs, Qs_inv=Qs_inv, Qv=Qv, Qv_inv=Qv_inv,
                              D=D, S=S, alpha=alpha, A=A_MATRICES,
                              blocks=blocks)
    for value in (Qs, Qs_inv, Qv, Qv_inv, D, S, alpha):
        value.setflags(write=False)
    return matrices


def first_order_blocks(derived, C):
    """The 13x13 matrices A, B, C and D of Q_t + A Q_x + B Q_y + C Q_z = D Q.

    Built entry by entry in the non-symmetric layout, independently of the
    symmetric form.
    """
    M = derived.M
    a1, a2, a3 = derived.alpha
    rho, rho_f = derived.rho, derived.rho_f
    m1, m2, m3 = derived.m
    b1, b2, b3 = derived.beta

    def cu(i, j):
        return C[i, j] + M * derived.alpha[i] * derived.alpha[j]

    c44, c55, c66 = C[3, 3], C[4, 4], C[5, 5]

    A11 = np.zeros((7, 6))
    A11[0, 0], A11[1, 0], A11[2, 0] = cu(0, 0), cu(0, 1), cu(0, 2)
    A11[0, 3], A11[1, 3], A11[2, 3] = a1 * M, a2 * M, a3 * M
    A11[4, 2] = c55
    A11[5, 1] = c66
    A11[6, 0], A11[6, 3] = -M * a1, -M
    A21 = np.zeros((6, 7))
    A21[0, 0], A21[0, 6] = m1 / b1, rho_f / b1
    A21[1, 5] = m2 / b2
    A21[2, 4] = m3 / b3
    A21[3, 0], A21[3, 6] = -rho_f / b1, -rho / b1
    A21[4, 5] = -rho_f / b2
    A21[5, 4] = -rho_f / b3

    B11 = np.zeros((7, 6))
    B11[0, 1], B11[1, 1], B11[2, 1] = cu(0, 1), cu(1, 1), cu(1, 2)
    B11[0, 4], B11[1, 4], B11[2, 4] = a1 * M, a2 * M, a3 * M
    B11[3, 2] = c44
    B11[5, 0] = c66
    B11[6, 1], B11[6, 4] = -M * a2, -M
    B21 = np.zeros((6, 7))
    B21[0, 5] = m1 / b1
    B21[1, 1], B21[1, 6] = m2 / b2, rho_f / b2
    B21[2, 3] = m3 / b3
    B21[3, 5] = -rho_f / b1
    B21[4, 1], B21[4, 6] = -rho_f / b2, -rho / b2
    B21[5, 3] = -rho_f / b3

    C11 = np.zeros((7, 6))
    C11[0, 2], C11[1, 2], C11[2, 2] = cu(0, 2), cu(1, 2), cu(2, 2)
    C11[0, 5], C11[1, 5], C11[2, 5] = a1 * M, a2 * M, a3 * M
    C11[3, 1] = c44
    C11[4, 0] = c55
    C11[6, 2], C11[6, 5] = -M * a3, -M
    C21 = np.zeros((6, 7))
    C21[0, 4] = m1 / b1
    C21[1, 3] = m2 / b2
    C21[2, 2], C21[2, 6] = m3 / b3, rho_f / b3
    C21[3, 4] = -rho_f / b1
    C21[4, 3] = -rho_f / b2
    C21[5, 2], C21[5, 6] = -rho_f / b3, -rho / b3

    D22 = np.zeros((6, 6))
    for i in range(3):
        rate = derived.eta / (derived.beta[i] * derived.kappa[i])
        D22[i, 3 + i] = rho_f * rate
        D22[3 + i, 3 + i] = -rho * rate

    def assemble(upper, lower):
        X = np.zeros((13, 13))
        X[:7, 7:] = -upper
        X[7:, :7] = -lower
        return X

    E = np.zeros((13, 13))
    E[7:, 7:] = D22
    return {'A': assemble(A11, A21), 'B': assemble(B11, B21),
            'C': assemble(C11, C21), 'D': E}


@lru_cache(maxsize=None)
def system_matrices(material):
    return assemble_system(derive(material), material.stiffness)


def fibonacci_directions(count=64):
    i = np.arange(count) + 0.5
    polar = np.arccos(1.0 - 2.0 * i / count)
    azimuth = math.pi * (1.0 + math.sqrt(5.0)) * i
    dirs = np.column_stack([np.cos(azimuth) * np.sin(polar),
                            np.sin(azimuth) * np.sin(polar),
                            np.cos(polar)])
    return np.vstack([np.eye(3), dirs])


@lru_cache(maxsize=None)
def max_wave_speed(material):
    """Largest phase speed of the inviscid system over sampled directions."""
    blocks = system_matrices(material).blocks
    speed = 0.0
    for k in fibonacci_directions():
        symbol = k[0] * blocks['A'] + k[1] * blocks['B'] + k[2] * blocks['C']
        speed = max(speed, float(np.max(np.abs(np.linalg.eigvals(symbol)))))
    return speed


def scales(material, length=1.0):
    """Reference density, speed, stress and time for a length unit."""
    rho = derive(material).rho
    speed = math.sqrt(max(material.c11, material.c22, material.c33) / rho)
    return {'length': length, 'density': rho, 'speed': speed,
            'stress': rho * speed ** 2, 'time': length / speed}


def nondimensionalize(material, length=1.0):
    """Rescale to unit bulk density, unit drained P speed and ``length``."""
    ref = scales(material, length)
    stress = ref['stress']
    changes = {key: getattr(material, key) / stress
               for key in ('K_s', 'K_f') + STIFFNESS_KEYS}
    changes.update(
        rho_s=material.rho_s / ref['density'],
        rho_f=material.rho_f / ref['density'],
        kappa=tuple(k / length ** 2 for k in material.kappa),
        eta=material.eta / (ref['density'] * ref['speed'] * length))
    return material.replace(**changes)


PRESETS = {
    'sandstone_orthotropic': lambda: PoroelasticMaterial.transverse(
        K_s=80 * GPA, rho_s=2500.0, c11=71.8 * GPA, c12=3.2 * GPA,
        c13=1.2 * GPA, c33=53.4 * GPA, c55=26.1 * GPA, phi=0.2,
        kappa1=600 * NANO_DARCY, kappa3=100 * NANO_DARCY, T1=2.0, T3=3.6,
        K_f=2.5 * GPA, rho_f=1040.0, eta=1.0 * MILLI,
        name='sandstone_orthotropic'),
    'epoxy_glass': lambda: PoroelasticMaterial.transverse(
        K_s=40 * GPA, rho_s=1815.0, c11=39.4 * GPA, c12=1.2 * GPA,
        c13=1.2 * GPA, c33=13.1 * GPA, c55=3.0 * GPA, phi=0.2,
        kappa1=600 * NANO_DARCY, kappa3=100 * NANO_DARCY, T1=2.0, T3=3.6,
        K_f=2.5 * GPA, rho_f=1040.0, eta=1.0 * MILLI, name='epoxy_glass'),
    'sandstone_isotropic': lambda: PoroelasticMaterial.transverse(
        K_s=40 * GPA, rho_s=2500.0, c11=36 * GPA, c12=12 * GPA,
        c13=12 * GPA, c33=36 * GPA, c55=12 * GPA, phi=0.2,
        kappa1=600 * NANO_DARCY, kappa3=600 * NANO_DARCY, T1=2.0, T3=2.0,
        K_f=2.5 * GPA, rho_f=1040.0, eta=1.0 * MILLI,
        name='sandstone_isotropic'),
    'shale_isotropic': lambda: PoroelasticMaterial.transverse(
        K_s=7.6 * GPA, rho_s=2210.0, c11=11.9 * GPA, c12=3.96 * GPA,
        c13=3.96 * GPA, c33=11.9 * GPA, c55=3.96 * GPA, phi=0.16,
        kappa1=100 * NANO_DARCY, kappa3=100 * NANO_DARCY, T1=2.0, T3=2.0,
        K_f=2.5 * GPA, rho_f=1040.0, eta=1.0 * MILLI,
        name='shale_isotropic'),
    # No permeability is tabulated for these; it is inert at eta = 0.
    'medium_I': lambda: PoroelasticMaterial.isotropic(
        K_s=12.2 * GPA, rho_s=2650.0, K_fr=9.6 * GPA, mu_fr=5.1 * GPA,
        phi=0.1, kappa=1e-12, T=2.0, K_f=1.985 * GPA, rho_f=880.0, eta=0.0,
        name='medium_I'),
    'medium_II': lambda: PoroelasticMaterial.isotropic(
        K_s=6.9 * GPA, rho_s=2200.0, K_fr=6.7 * GPA, mu_fr=3.0 * GPA,
        phi=0.4, kappa=1e-12, T=2.0, K_f=2.0 * GPA, rho_f=950.0, eta=0.0,
        name='medium_II'),
    'medium_III': lambda: PoroelasticMaterial.isotropic(
        K_s=6.9 * GPA, rho_s=2650.0, K_fr=6.7 * GPA, mu_fr=3.0 * GPA,
        phi=0.2, kappa=1e-12, T=2.0, K_f=2.0 * GPA, rho_f=750.0, eta=0.0,
        name='medium_III'),
}


def preset(name):
    try:
        factory = PRESETS[name]
    except KeyError:
        raise UnknownPresetError(name, PRESETS.keys())
    return factory()


UNITS = {
    'pa': 1.0, 'kpa': 1e3, 'mpa': 1e6, 'gpa': GPA,
    'kg/m3': 1.0, 'g/cm3': 1e3,
    'm2': 1.0, 'md': 9.869233e-16, 'd': 9.869233e-13, '1e-15m2': NANO_DARCY,
    'pa.s': 1.0, 'cp': MILLI,
}
UNIT_GROUPS = {
    'modulus': ('pa', 'kpa', 'mpa', 'gpa'),
    'density': ('kg/m3', 'g/cm3'),
    'permeability': ('m2', 'md', 'd', '1e-15m2'),
    'viscosity': ('pa.s', 'cp'),
}
FILE_KEYS = {
    'K_s': 'modulus', 'K_f': 'modulus', 'K_fr': 'modulus',
    'mu_fr': 'modulus', 'rho_s': 'density', 'rho_f': 'density',
    'phi': None, 'kappa1': 'permeability', 'kappa2': 'permeability',
    'kappa3': 'permeability', 'kappa': 'permeability', 'T1': None,
    'T2': None, 'T3': None, 'T': None, 'eta': 'viscosity',
}
FILE_KEYS.update({key: 'modulus' for key in STIFFNESS_KEYS})
LINE_RE = re.compile(r'^(?P<key>[A-Za-z_][\w]*)\s*=\s*(?P<value>\S+)'
                     r'(?:\s+(?P<unit>\S+))?$')


def load_material(path):
    """Read a ``key = value [unit]`` material file."""
    values = {}
    symmetry = 'orthotropic'
    name = ''
    with open(path, 'r', encoding='utf-8') as handle:
        lines = handle.readlines()
    for lineno, line in enumerate(lines, start=1):
        text = line.split('#', 1)[0].strip()
        if not text:
            continue
        match = LINE_RE.match(text)
        if match is None:
            raise MaterialError('line %d: expected "key = value [unit]"'
                                % lineno, lineno=lineno)
        key, raw, unit = match.group('key', 'value', 'unit')
        if key == 'symmetry':
            if raw not in ('orthotropic', 'transverse', 'isotropic'):
                raise MaterialError('line %d: unknown symmetry "%s"'
                                    % (lineno, raw), lineno=lineno)
            symmetry = raw
            continue
        if key == 'name':
            name = raw
            continue
        if key not in FILE_KEYS:
            raise MaterialError('line %d: unknown key "%s"' % (lineno, key),
                                lineno=lineno)
        try:
            value = float(raw)
        except ValueError:
            raise MaterialError('line %d: invalid number "%s"'
                                % (lineno, raw), lineno=lineno)
        group = FILE_KEYS[key]
        if unit is not None:
            unit = unit.lower()
            if group is None or unit not in UNIT_GROUPS[group]:
                raise MaterialError('line %d: unit "%s" not valid for %s'
                                    % (lineno, unit, key), lineno=lineno)
            value *= UNITS[unit]
        values[key] = value
    return _material_from_values(values, symmetry, name or str(path))


def _material_from_values(values, symmetry, name):
    values = dict(values)
    if 'kappa' in values:
        values.setdefault('kappa1', values['kappa'])
        values.setdefault('kappa3', values['kappa'])
    if 'T' in values:
        values.setdefault('T1', values['T'])
        values.setdefault('T3', values['T'])
    try:
        common = dict(K_s=values['K_s'], rho_s=values['rho_s'],
                      phi=values['phi'], K_f=values['K_f'],
                      rho_f=values['rho_f'], eta=values.get('eta', 0.0),
                      name=name)
        if symmetry == 'isotropic' and 'K_fr' in values:
            return PoroelasticMaterial.isotropic(
                K_fr=values['K_fr'], mu_fr=values['mu_fr'],
                kappa=values['kappa1'], T=values['T1'], **common)
        if symmetry in ('isotropic', 'transverse'):
            c11 = values['c11']
            c12 = values['c12']
            c13 = values.get('c13', c12)
            c33 = values.get('c33', c11)
            c55 = values.get('c55', (c11 - c12) / 2.0)
            return PoroelasticMaterial.transverse(
                c11=c11, c12=c12, c13=c13, c33=c33, c55=c55,
                kappa1=values['kappa1'],
                kappa3=values.get('kappa3', values['kappa1']),
                T1=values['T1'], T3=values.get('T3', values['T1']),
                **common)
        stiffness = {key: values[key] for key in STIFFNESS_KEYS}
        kappa = (values['kappa1'], values.get('kappa2', values['kappa1']),
                 values.get('kappa3', values['kappa1']))
        T = (values['T1'], values.get('T2', values['T1']),
             values.get('T3', values['T1']))
        return PoroelasticMaterial(kappa=kappa, T=T, **stiffness, **common)
    except KeyError as exc:
        raise MaterialError('missing material property %s' % exc)


class CoefficientField(object):
    """Maps mesh points to a material label and a density scale."""

    def __init__(self, materials):
        self.materials = list(materials)
        if not self.materials:
            raise MaterialError('a coefficient field needs a material')

    def evaluate(self, points, elements):
        """Labels and density scales at ``points`` (shape (..., dim))."""
        raise NotImplementedError

    def element_average(self):
        return False


class UniformField(CoefficientField):
    def __init__(self, material):
        super(UniformField, self).__init__([material])

    def evaluate(self, points, elements):
        shape = points.shape[:-1]
        return np.zeros(shape, dtype=int), np.ones(shape)


class ElementField(CoefficientField):
    def __init__(self, materials, element_labels):
        super(ElementField, self).__init__(materials)
        self.element_labels = np.asarray(element_labels, dtype=int)

    def evaluate(self, points, elements):
        labels = self.element_labels[elements]
        labels = np.broadcast_to(labels, points.shape[:-1]).copy()
        return labels, np.ones(points.shape[:-1])


class RegionField(CoefficientField):
    """Piecewise-constant media chosen by ``labeller(points) -> index``."""

    def __init__(self, materials, labeller):
        super(RegionField, self).__init__(materials)
        self.labeller = labeller

    def evaluate(self, points, elements):
        flat = points.reshape(-1, points.shape[-1])
        labels = _call_pointwise(self.labeller, flat)
        labels = np.asarray(labels)
        if labels.shape != (len(flat),) or \
                not np.issubdtype(labels.dtype, np.integer):
            raise FieldEvaluationError(flat[0], 'labeller must return one '
                                       'integer per point')
        bad = np.flatnonzero((labels < 0) | (labels >= len(self.materials)))
        if len(bad):
            raise FieldEvaluationError(flat[bad[0]], 'label %d out of range'
                                       % labels[bad[0]])
        return labels.reshape(points.shape[:-1]), np.ones(points.shape[:-1])


class ModulatedField(CoefficientField):
    """Scales every density of ``base`` by a positive ``factor(points)``.

    In ``element_average`` mode the factor is replaced by its quadrature
    average over each element.
    """

    def __init__(self, base, factor, mode='pointwise'):
        if mode not in ('pointwise', 'element_average'):
            raise MaterialError('unknown modulation mode "%s"' % mode)
        super(ModulatedField, self).__init__(base.materials)
        self.base = base
        self.factor = factor
        self.mode = mode

    def element_average(self):
        return self.mode == 'element_average'

    def evaluate(self, points, elements):
        labels, scale = self.base.evaluate(points, elements)
        flat = points.reshape(-1, points.shape[-1])
        factor = np.asarray(_call_pointwise(self.factor, flat), dtype=float)
        factor = factor.reshape(points.shape[:-1])
        bad = np.flatnonzero(~(np.isfinite(factor) & (factor > 0.0)))
        if len(bad):
            raise FieldEvaluationError(flat[bad[0]],
                                       'density factor %r is not positive'
                                       % factor.flat[bad[0]])
        return labels, scale * factor


def sine_modulation(amplitude=0.5, wavenumber=2.0 * math.pi):
    """1 + a sin(k x) sin(k y) on the first two coordinates."""
    def factor(points):
        return 1.0 + amplitude * np.sin(wavenumber * points[:, 0]) * \
            np.sin(wavenumber * points[:, 1])
    return factor


def _call_pointwise(function, points):
    try:
        return function(points)
    except Exception as exc:
        for point in points:
            try:
                function(point[None, :])
            except Exception as inner:
                raise FieldEvaluationError(point, str(inner) or
                                           type(inner).__name__)
        raise FieldEvaluationError(points[0], str(exc) or
                                   type(exc).__name__)


class CoefficientTables(object):
    """Coefficient matrices sampled at every element's quadrature points.

    ``Qs_inv``, ``Qv_inv`` and ``Qv_inv_D`` are the WADG weights; ``Qs``
    and ``Qv`` are kept for the energy.  ``rate`` and ``ratio`` are the
    nodal data of the exact diffusive substep.
    """

    def __init__(self, **arrays):
        self.__dict__.update(arrays)

    @property
    def bounds(self):
        return {'s_min': self.s_min, 's_max': self.s_max,
                'v_min': self.v_min, 'v_max': self.v_max}


def _stack(materials, attribute):
    return np.stack([getattr(system_matrices(m), attribute)
                     for m in materials])


def _element_average(ref, values):
    w = ref.quad_weights / ref.quad_weights.sum()
    return values @ w


def evaluate_points(field, points, elements):
    """Q_s^-1, Q_v^-1 and Q_v^-1 D at arbitrary points."""
    points = np.atleast_2d(points)
    labels, scale = field.evaluate(points, np.asarray(elements))
    Qs_inv = _stack(field.materials, 'Qs_inv')[labels]
    Qv_inv = _stack(field.materials, 'Qv_inv')[labels] / scale[..., None,
                                                               None]
    Qv_inv_D = _stack(field.materials, 'Qv_inv_D')[labels] / \
        scale[..., None, None]
    return Qs_inv, Qv_inv, Qv_inv_D


def evaluate_field(field, mesh, ref):
    """Sample a coefficient field at the volume quadrature and the nodes."""
    elements = np.arange(mesh.K)[:, None]
    xq = mesh.map_points(ref.quad_points)
    xn = mesh.map_points(ref.nodes)
    labels, scale = field.evaluate(xq, elements)
    node_labels, node_scale = field.evaluate(xn, elements)
    if field.element_average():
        avg = _element_average(ref, scale)
        scale = np.repeat(avg[:, None], ref.Nq, axis=1)
        node_scale = np.repeat(avg[:, None], ref.Np, axis=1)

    materials = field.materials
    inv_s = scale[..., None, None]
    Qs_inv = _stack(materials, 'Qs_inv')[labels]
    Qs = _stack(materials, 'Qs')[labels]
    Qv_inv = _stack(materials, 'Qv_inv')[labels] / inv_s
    Qv = _stack(materials, 'Qv')[labels] * inv_s
    Qv_inv_D = _stack(materials, 'Qv_inv_D')[labels] / inv_s
    decay = np.stack([np.diagonal(system_matrices(m).D)[3:]
                      for m in materials])[labels]

    QvD_nodes = _stack(materials, 'Qv_inv_D')[node_labels]
    idx = np.arange(3)
    rate = QvD_nodes[..., 3 + idx, 3 + idx] / node_scale[..., None]
    ratio = np.array([derive(m).rho_f / derive(m).rho
                      for m in materials])[node_labels]

    speeds = np.array([max_wave_speed(m) for m in materials])
    speed = np.max(speeds[labels] / np.sqrt(scale), axis=1)

    s_eig = np.linalg.eigvalsh(Qs)
    v_eig = np.linalg.eigvalsh(Qv)
    element_constant = bool(
        np.all(labels == labels[:, :1]) and
        np.allclose(scale, scale[:, :1], rtol=1e-14, atol=0.0))
    tables = CoefficientTables(
        Qs_inv=Qs_inv, Qv_inv=Qv_inv, Qv_inv_D=Qv_inv_D, Qs=Qs, Qv=Qv,
        decay=decay, rate=rate, ratio=ratio, speed=speed, labels=labels,
        scale=scale, s_min=float(s_eig.min()), s_max=float(s_eig.max()),
        v_min=float(v_eig.min()), v_max=float(v_eig.max()),
        element_constant=element_constant, materials=materials)
    for name in ('s_min', 's_max', 'v_min', 'v_max'):
        if not np.isfinite(getattr(tables, name)):
            raise MaterialError('coefficient bound %s is not finite' % name)
    logger.debug('coefficient tables K=%d Nq=%d constant=%s s=[%g, %g] '
                 'v=[%g, %g]', mesh.K, ref.Nq, element_constant,
                 tables.s_min, tables.s_max, tables.v_min, tables.v_max)
    return tables
