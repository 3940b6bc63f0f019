"""
Experiment drivers: convergence studies, operator spectra, simulations,
dispersion curves, the material table and the heterogeneity comparison.

Every driver takes a validated :class:`porowave.config.RunConfig`.
"""
import csv
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, List

import numpy as np
from scipy.linalg import LinAlgError, eigvals
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, \
    LinearOperator, eigs

from . import settings
from .exceptions import (ConfigurationError, EigenSolveError, OutputError,
                         ReferenceNormError, SizeGuardError,
                         SolverDivergedError)
from .field_map import STATE_FIELDS, active_fields
from .material import (PRESETS, ModulatedField, UniformField, derive,
                       load_material, nondimensionalize, preset,
                       sine_modulation, system_matrices)
from .mesh import BoundaryTag, UniformGridSpec, build_uniform, load_mesh
from .output import (EnergyTrace, ReceiverRecorder, RunManifest,
                     ensure_directory, write_rows, write_snapshot)
from .planewave import (build_symbol, dispersion_sweep, eigensolve,
                        plane_wave_solution, select_modes)
from .refelem import build_reference
from .solver import (Discretization, PointSource, Ricker, SolverConfig,
                     TimeStepper, stiffness_report)

logger = logging.getLogger(__name__)

ENERGY_TOLERANCE = 1e-10


# Building blocks

def uniform_mesh(dim, k1d, extent=None, origin=None, boundary='abc'):
    periodic = boundary == 'periodic'
    spec = UniformGridSpec(dim=dim, k1d=k1d, extents=extent, origin=origin,
                           boundary='abc' if periodic else boundary,
                           periodic=periodic)
    return build_uniform(spec)


def build_mesh(config, k1d=None):
    options = config.section('mesh')
    dim = config['run.dim']
    if options['file'] and k1d is None:
        boundary = options['boundary']
        if boundary == 'periodic':
            raise ConfigurationError('periodic pairing is only available '
                                     'on generated meshes')
        mesh = load_mesh(options['file'],
                         default_tag=BoundaryTag.parse(boundary))
        if mesh.dim != dim:
            raise ConfigurationError('mesh file is %dD but the run is %dD'
                                     % (mesh.dim, dim))
        return mesh
    return uniform_mesh(dim, k1d or options['k1d'], options['extent'],
                        options['origin'], options['boundary'])


def build_material(config, scaled=None):
    options = config.section('material')
    if options['file']:
        material = load_material(options['file'])
    else:
        material = preset(options['preset'])
    if options['inviscid']:
        material = material.inviscid()
    if scaled is None:
        scaled = config['run.units'] == 'scaled'
    if scaled:
        material = nondimensionalize(material,
                                     length=max(config['mesh.extent']))
    return material


def build_field(config, material, mode=None):
    options = config.section('material')
    base = UniformField(material)
    if options['modulation'] == 'none':
        return base
    factor = sine_modulation(options['modulation_amplitude'])
    return ModulatedField(base, factor,
                          mode=mode or options['modulation_mode'])


def wavevector(config):
    return 2.0 * math.pi * np.asarray(config['wave.wavenumber'], dtype=float)


def reference_solution(config, material):
    """Superposed fast P, S and slow P plane wave of the configured k."""
    dim = config['run.dim']
    plane = config['run.plane']
    fields = active_fields('compact2d', plane, 2) if dim == 2 else None
    return plane_wave_solution(material, wavevector(config), viscous=True,
                               plane=plane, fields=fields)


def build_sources(config):
    options = config.section('source')
    if not options['location']:
        return []
    delay = options['delay'] or None
    return [PointSource(location=options['location'],
                        weights=options['weights'],
                        signature=Ricker(options['frequency'], delay))]


def solver_config(config, reference=None, sources=(), alpha=None):
    flux = config.section('flux')
    alpha_tau, alpha_v = flux['alpha_tau'], flux['alpha_v']
    if alpha is not None:
        alpha_tau = alpha_v = alpha
    return SolverConfig(
        alpha_tau=alpha_tau, alpha_v=alpha_v, cfl=config['time.cfl'],
        scheme=config['time.scheme'], final_time=config['time.final_time'],
        mode=config['run.mode'], plane=config['run.plane'],
        sources=list(sources), reference=reference,
        progress_every=config['time.progress_every'])


def build_discretization(config, mesh, coefficients, reference=None,
                         sources=(), alpha=None):
    ref = build_reference(mesh.dim, config['run.N'])
    return Discretization(mesh, ref, coefficients,
                          solver_config(config, reference, sources, alpha))


def time_step(config, disc):
    dt = config['time.dt']
    return dt if dt > 0.0 else disc.estimate_dt()


# Error norms

def _quadrature_weights(disc):
    return disc.mesh.J[:, None] * disc.ref.quad_weights[None, :]


def _at_quadrature(disc, values):
    out = np.zeros((len(STATE_FIELDS), disc.mesh.K, disc.ref.Nq))
    out[list(disc.fields)] = np.einsum('qn,fkn->fkq', disc.ref.Vq, values)
    return out


def l2_relative_error(disc, state, reference, t=None):
    """Relative L2 error over all 13 fields, by volume quadrature.

    Fields the run mode does not evolve count as zero.
    """
    t = state.t if t is None else t
    xq = disc.quadrature_points().reshape(-1, disc.mesh.dim)
    exact = np.asarray(reference(xq, t)).reshape(
        len(STATE_FIELDS), disc.mesh.K, disc.ref.Nq)
    w = _quadrature_weights(disc)
    norm = float(np.sum(exact ** 2 * w))
    if not norm > 0.0:
        raise ReferenceNormError()
    diff = exact - _at_quadrature(disc, state.values)
    return math.sqrt(float(np.sum(diff ** 2 * w)) / norm)


def relative_difference(disc, state, other):
    w = _quadrature_weights(disc)
    a = _at_quadrature(disc, state.values)
    b = _at_quadrature(disc, other.values)
    norm = float(np.sum(a ** 2 * w))
    if not norm > 0.0:
        raise ReferenceNormError()
    return math.sqrt(float(np.sum((a - b) ** 2 * w)) / norm)


# Convergence

@dataclass
class ConvergenceLevel:
    N: int
    k1d: int
    h: float
    error: float
    dofs: int
    steps: int
    dt: float
    seconds: float


@dataclass
class ConvergenceReport:
    levels: List[ConvergenceLevel]
    metadata: dict = field(default_factory=dict)

    header = ('N', 'k1d', 'h', 'error', 'rate', 'dofs', 'steps', 'dt',
              'seconds')

    @property
    def errors(self):
        return [level.error for level in self.levels]

    @property
    def rates(self):
        """Observed orders between consecutive levels."""
        out = []
        for coarse, fine in zip(self.levels, self.levels[1:]):
            out.append(math.log(coarse.error / fine.error)
                       / math.log(coarse.h / fine.h))
        return out

    def fitted_rate(self, last=3):
        """Least-squares slope of log error against log h."""
        levels = self.levels[-last:]
        if len(levels) < 2:
            raise ConfigurationError('a rate needs at least two levels')
        h = np.log([level.h for level in levels])
        e = np.log([level.error for level in levels])
        return float(np.polyfit(h, e, 1)[0])

    def rows(self):
        rates = [''] + self.rates
        for level, rate in zip(self.levels, rates):
            yield (level.N, level.k1d, repr(level.h), repr(level.error),
                   rate if rate == '' else repr(rate), level.dofs,
                   level.steps, repr(level.dt), '%.3f' % level.seconds)


def convergence_level(config, material, reference, k1d):
    started = time.time()
    options = config.section('mesh')
    mesh = uniform_mesh(config['run.dim'], k1d, options['extent'],
                        options['origin'], options['boundary'])
    disc = build_discretization(config, mesh, UniformField(material),
                                reference)
    state = disc.project(reference, 0.0)
    stepper = TimeStepper(disc)
    final_time = config['time.final_time']
    dt = time_step(config, disc)
    steps = max(1, int(math.ceil(final_time / dt - 1e-12)))
    state = stepper.advance(state, final_time, final_time / steps)
    error = l2_relative_error(disc, state, reference)
    logger.info('level k1d=%d N=%d error=%.6e', k1d, disc.ref.N, error)
    return ConvergenceLevel(N=disc.ref.N, k1d=k1d, h=mesh.h, error=error,
                            dofs=disc.ndofs, steps=steps,
                            dt=final_time / steps,
                            seconds=time.time() - started)


def run_convergence(config, directory=None, jobs=None):
    """Plane-wave errors over the configured mesh levels.

    Runs in nondimensional units.  Levels run concurrently when
    ``jobs`` > 1; results keep level order.
    """
    material = build_material(config, scaled=True)
    reference = reference_solution(config, material)
    levels = config['mesh.levels']
    jobs = jobs or config['run.jobs']

    def run(k1d):
        return convergence_level(config, material, reference, k1d)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, levels))
    else:
        results = [run(k1d) for k1d in levels]

    report = ConvergenceReport(results, metadata={
        'material': material.name, 'N': config['run.N'],
        'alpha_tau': config['flux.alpha_tau'],
        'alpha_v': config['flux.alpha_v'],
        'viscous': material.eta > 0.0, 'scheme': config['time.scheme'],
        'mode': config['run.mode'], 'boundary': config['mesh.boundary']})
    if directory:
        write_rows(os.path.join(directory, 'convergence.csv'),
                   ConvergenceReport.header, report.rows())
    return report


def temporal_refinement(disc, initial, final_time, steps, scheme=None,
                        reference_factor=4):
    """Errors against a fine-step run at fixed resolution, and the orders."""
    stepper = TimeStepper(disc, scheme)
    finest = max(steps) * reference_factor
    exact = stepper.advance(initial.copy(), final_time, final_time / finest)
    errors = []
    for n in steps:
        state = stepper.advance(initial.copy(), final_time, final_time / n)
        errors.append(relative_difference(disc, exact, state))
    orders = [math.log(e0 / e1) / math.log(n1 / float(n0))
              for (n0, e0), (n1, e1) in zip(zip(steps, errors),
                                            zip(steps[1:], errors[1:]))]
    return errors, orders


# Spectra

@dataclass
class SpectrumResult:
    alpha: float
    eigenvalues: Any
    radius: float
    max_real: float
    estimate: float = None

    @property
    def relative_max_real(self):
        return self.max_real / self.radius if self.radius else 0.0


def assemble_global_operator(disc, dissipation=True, t=0.0):
    """Dense matrix of the source-free semi-discrete operator.

    Column j is rhs(e_j) minus the affine part from exact boundary data.
    """
    n = disc.ndofs
    if n > settings.MAX_DENSE_DOFS:
        raise SizeGuardError(n, settings.MAX_DENSE_DOFS)
    shape = disc.shape
    offset = disc.rhs(np.zeros(shape), t, dissipation=dissipation,
                      sources=False)
    matrix = np.empty((n, n))
    unit = np.zeros(n)
    for j in range(n):
        unit[j] = 1.0
        matrix[:, j] = (disc.rhs(unit.reshape(shape), t,
                                 dissipation=dissipation, sources=False)
                        - offset).ravel()
        unit[j] = 0.0
    logger.debug('assembled dense operator of size %d', n)
    return matrix


def operator_action(disc, dissipation=True, t=0.0):
    """Matrix-free LinearOperator of the source-free semi-discrete operator."""
    shape = disc.shape
    offset = disc.rhs(np.zeros(shape), t, dissipation=dissipation,
                      sources=False)

    def matvec(x):
        x = np.asarray(x).real.reshape(shape)
        return (disc.rhs(x, t, dissipation=dissipation, sources=False)
                - offset).ravel()

    return LinearOperator((disc.ndofs, disc.ndofs), matvec=matvec,
                          dtype=float)


def spectral_radius_estimate(operator, tol=1e-12, seed=0):
    """Largest eigenvalue modulus by implicitly restarted Arnoldi."""
    if isinstance(operator, np.ndarray):
        if not np.any(operator):
            return 0.0
        if operator.shape[0] < 3:
            return float(np.max(np.abs(np.linalg.eigvals(operator))))
    n = operator.shape[0]
    v0 = np.random.default_rng(seed).standard_normal(n)
    try:
        values = eigs(operator, k=min(6, n - 2), which='LM', tol=tol, v0=v0,
                      return_eigenvectors=False)
    except (ArpackNoConvergence, ArpackError) as exc:
        raise EigenSolveError('Arnoldi iteration failed: %s' % exc,
                              matrix='A_h')
    return float(np.max(np.abs(values)))


def operator_spectrum(disc, alpha=None):
    matrix = assemble_global_operator(disc)
    try:
        values = eigvals(matrix)
    except (LinAlgError, ValueError) as exc:
        raise EigenSolveError('eigensolve of A_h failed: %s' % exc,
                              matrix='A_h')
    radius = float(np.max(np.abs(values)))
    return SpectrumResult(alpha=alpha, eigenvalues=values, radius=radius,
                          max_real=float(np.max(values.real)),
                          estimate=spectral_radius_estimate(matrix))


def spectra(config, directory=None, alphas=None):
    """Full spectra of A_h for each penalty value, in nondimensional units."""
    material = build_material(config, scaled=True)
    mesh = build_mesh(config)
    reference = None
    if config['mesh.boundary'] == 'exact':
        reference = reference_solution(config, material)
    results = []
    for alpha in alphas if alphas is not None else config['flux.alphas']:
        disc = build_discretization(config, mesh, build_field(config,
                                                              material),
                                    reference, alpha=alpha)
        result = operator_spectrum(disc, alpha)
        logger.info('alpha=%g radius=%.6e max Re=%.3e estimate=%.6e',
                    alpha, result.radius, result.max_real, result.estimate)
        results.append(result)
        if directory:
            write_rows(os.path.join(directory, 'eigenvalues_alpha%g.csv'
                                    % alpha), ('re', 'im'),
                       ((repr(v.real), repr(v.imag))
                        for v in result.eigenvalues))
    if directory:
        write_rows(os.path.join(directory, 'spectra.csv'),
                   ('alpha', 'radius', 'max_real', 'estimate'),
                   ((repr(r.alpha), repr(r.radius), repr(r.max_real),
                     repr(r.estimate)) for r in results))
    return results


# Simulation

@dataclass
class SimulationResult:
    disc: Any
    state: Any
    energy: Any
    outputs: List[str] = field(default_factory=list)
    audit: Any = None


@dataclass
class EnergyAudit:
    passed: bool
    worst: float
    step: int


def audit_energy_trace(trace, tolerance=ENERGY_TOLERANCE):
    """Check a recorded energy trace for per-step monotone decay.

    ``trace`` is an :class:`EnergyTrace`, a list of rows or a CSV path.
    """
    if isinstance(trace, EnergyTrace):
        rows = trace.rows
    elif isinstance(trace, (str, os.PathLike)):
        try:
            with open(trace, 'r', encoding='utf-8', newline='') as handle:
                rows = [(int(r['step']), float(r['t']), float(r['energy']))
                        for r in csv.DictReader(handle)]
        except OSError as exc:
            raise OutputError(trace, exc.strerror or str(exc))
    else:
        rows = list(trace)
    energies = np.array([row[2] for row in rows], dtype=float)
    worst, step = 0.0, -1
    for i in range(1, len(energies)):
        scale = max(energies[i - 1], np.finfo(float).tiny)
        growth = (energies[i] - energies[i - 1]) / scale
        if growth > worst:
            worst, step = growth, int(rows[i][0])
    return EnergyAudit(passed=worst <= tolerance, worst=worst, step=step)


def run_simulation(config, directory=None):
    """Time loop with receivers, energy trace, snapshots and manifest."""
    directory = ensure_directory(directory or config['output.directory'])
    options = config.section('output')
    material = build_material(config)
    mesh = build_mesh(config)
    reference = None
    if config['wave.initial'] == 'planewave':
        reference = reference_solution(config, material)
    sources = build_sources(config)
    disc = build_discretization(config, mesh, build_field(config, material),
                                reference, sources)
    state = disc.project(reference) if reference else disc.zeros()
    stepper = TimeStepper(disc)
    dt = time_step(config, disc)
    every = options['snapshot_every']
    fields = tuple(name.strip() for name in options['fields'].split(',')
                   if name.strip())
    outputs = []

    def snapshot(step, current, name=None):
        path = os.path.join(directory, name or 'snapshot_%06d.vtk' % step)
        outputs.append(write_snapshot(disc, current, path, fields))

    energy_path = os.path.join(directory, 'energy.csv') \
        if options['energy'] else None
    with RunManifest(os.path.join(directory, 'manifest.jsonl')) as manifest,\
            EnergyTrace(energy_path) as trace, \
            ReceiverRecorder(disc, config['receivers.points'], directory,
                             config['receivers.stride']) as receivers:
        manifest.start('simulate', config.echo())
        manifest.write('setup', K=mesh.K, N=disc.ref.N, dofs=disc.ndofs,
                       dt=dt, stiffness=stiffness_report(disc.tables))
        last = [state]

        def record(step, current):
            trace.append(step, current.t, disc.energy(current))
            receivers.record(step, current)
            if every and step % every == 0:
                snapshot(step, current)
            last[0] = current

        record(0, state)
        try:
            state = stepper.advance(state, config['time.final_time'], dt,
                                    callback=record)
        except SolverDivergedError as exc:
            snapshot(0, last[0], 'diverged.vtk')
            manifest.write('diverged', element=exc.element, time=exc.time,
                           last_good=last[0].t)
            raise
        if every:
            snapshot(0, state, 'final.vtk')

        audit = None
        if not sources and config['mesh.boundary'] != 'exact':
            audit = audit_energy_trace(trace)
            if not audit.passed:
                logger.warning('energy grew by %.3e (relative) at step %d',
                               audit.worst, audit.step)
        outputs.extend(receivers.paths)
        if energy_path:
            outputs.append(energy_path)
        manifest.write('finish', t=state.t, energy=disc.energy(state),
                       audit=audit.__dict__ if audit else None,
                       outputs=outputs)
    logger.info('simulation finished at t=%.6e with %d outputs', state.t,
                len(outputs))
    return SimulationResult(disc=disc, state=state, energy=trace,
                            outputs=outputs, audit=audit)


# Dispersion and materials

DISPERSION_HEADER = ('angle', 'mode', 'phase_velocity', 'attenuation',
                     'wavenumber')


def run_dispersion(config, directory=None):
    material = build_material(config)
    plane = 'xz' if config['run.dim'] == 3 else config['run.plane']
    rows = dispersion_sweep(material, config['dispersion.angles'],
                            config['dispersion.frequency'], plane=plane,
                            viscous=not config['material.inviscid'])
    if directory:
        write_rows(os.path.join(directory, 'dispersion.csv'),
                   DISPERSION_HEADER,
                   ((r.angle, r.mode, repr(r.phase_velocity),
                     repr(r.attenuation), repr(r.wavenumber))
                    for r in rows))
    return rows


MATERIALS_HEADER = ('name', 'rho', 'rho_f', 'M', 'alpha1', 'alpha3',
                    'fast_p', 'shear', 'slow_p', 'omega_c', 'stiffness')


def materials_table(names=None, directory=None):
    """Derived coefficients and x-direction inviscid speeds per preset."""
    rows = []
    for name in names or sorted(PRESETS):
        material = preset(name)
        derived = derive(material)
        k = (1.0, 0.0, 0.0)
        modes = select_modes(eigensolve(build_symbol(material, k, False)), k)
        speeds = [mode.speed for mode in modes]
        stiffness = float(np.linalg.norm(system_matrices(material).Qv_inv_D,
                                         2))
        rows.append((name, derived.rho, derived.rho_f, derived.M,
                     derived.alpha[0], derived.alpha[2], speeds[0],
                     speeds[1], speeds[2], derived.omega_c, stiffness))
    if directory:
        write_rows(os.path.join(directory, 'materials.csv'),
                   MATERIALS_HEADER, rows)
    return rows


# Heterogeneity

@dataclass
class HeterogeneityResult:
    N: int
    k1d: int
    difference: float
    pointwise: Any
    averaged: Any


def heterogeneity_comparison(config, directory=None):
    """Same plane-wave run with pointwise and element-averaged densities.

    Returns the relative L2 difference of the final states.
    """
    material = build_material(config)
    mesh = build_mesh(config)
    reference = reference_solution(config, material)
    final_time = config['time.final_time']
    states = {}
    disc = None
    for mode in ('pointwise', 'element_average'):
        disc = build_discretization(config, mesh,
                                    build_field(config, material, mode))
        dt = time_step(config, disc)
        state = TimeStepper(disc).advance(disc.project(reference),
                                          final_time, dt)
        states[mode] = state
        if directory:
            write_snapshot(disc, state, os.path.join(
                directory, 'heterogeneity_%s.vtk' % mode),
                tuple(config['output.fields'].replace(' ', '').split(',')))
    difference = relative_difference(disc, states['pointwise'],
                                     states['element_average'])
    logger.info('pointwise vs averaged difference %.6e (N=%d, K=%d)',
                difference, disc.ref.N, mesh.K)
    result = HeterogeneityResult(N=disc.ref.N, k1d=config['mesh.k1d'],
                                 difference=difference,
                                 pointwise=states['pointwise'],
                                 averaged=states['element_average'])
    if directory:
        write_rows(os.path.join(directory, 'heterogeneity.csv'),
                   ('N', 'k1d', 'difference'),
                   [(result.N, result.k1d, repr(difference))])
    return result


def _materials(config, directory=None):
    return materials_table(directory=directory)


DRIVERS = {
    'converge': run_convergence,
    'spectra': spectra,
    'dispersion': run_dispersion,
    'materials': _materials,
    'heterogeneity': heterogeneity_comparison,
}


def run_experiment(config, directory=None):
    """Dispatch on ``run.experiment``."""
    name = config['run.experiment']
    directory = ensure_directory(directory or config['output.directory'])
    if name == 'simulate':
        return run_simulation(config, directory)
    started = time.time()
    with RunManifest(os.path.join(directory, 'manifest.jsonl')) as manifest:
        manifest.start(name, config.echo())
        result = DRIVERS[name](config, directory)
        manifest.write('finish', seconds=round(time.time() - started, 3))
    return result
