import csv
import json
import math
import os
import tempfile
from unittest import mock

import numpy as np
import pytest

from porowave import settings
from porowave.config import load_config
from porowave.exceptions import (ConfigurationError, OutputError,
                                 ReferenceNormError, SizeGuardError,
                                 SolverDivergedError)
from porowave.experiments import (ConvergenceLevel, ConvergenceReport,
                                  assemble_global_operator,
                                  audit_energy_trace, heterogeneity_comparison,
                                  l2_relative_error, materials_table,
                                  operator_action, operator_spectrum,
                                  run_convergence, run_dispersion,
                                  run_experiment, run_simulation,
                                  spectral_radius_estimate, spectra,
                                  temporal_refinement)
from porowave.field_map import active_fields
from porowave.material import PRESETS, nondimensionalize
from porowave.output import EnergyTrace
from porowave.planewave import plane_wave_solution

from . import BaseTestCase
from .utils import random_state, scaled_discretization


def read_csv(path):
    with open(path, 'r', encoding='utf-8', newline='') as handle:
        return list(csv.reader(handle))


def read_manifest(path):
    with open(path, 'r', encoding='utf-8') as handle:
        return [json.loads(line) for line in handle]


class DirectoryTestCase(BaseTestCase):

    def setUp(self):
        super(DirectoryTestCase, self).setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.directory = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def config(self, **sections):
        data = {name: dict(values) for name, values in sections.items()}
        data.setdefault('output', {}).setdefault('directory', self.directory)
        return load_config(data=data)


class ErrorNormTestCase(BaseTestCase):

    def setUp(self):
        super(ErrorNormTestCase, self).setUp()
        self.disc = scaled_discretization(self.material)
        self.wave = plane_wave_solution(nondimensionalize(self.material),
                                        (2 * math.pi, 2 * math.pi))

    def test_zero_state(self):
        error = l2_relative_error(self.disc, self.disc.zeros(), self.wave)
        self.assertAlmostEqual(error, 1.0, places=14)

    def test_zero_reference(self):
        with self.assertRaises(ReferenceNormError):
            l2_relative_error(self.disc, self.disc.zeros(),
                              lambda points, t: np.zeros((13, len(points))))

    def test_projected_polynomial(self):
        def linear(points, t):
            return np.outer(np.arange(1.0, 14.0), 1.0 + points[:, 0]
                            - 2.0 * points[:, 1])

        state = self.disc.project(linear)
        self.assertLess(l2_relative_error(self.disc, state, linear), 1e-12)

    def test_projection_beats_coarser_projection(self):
        fine = scaled_discretization(self.material, k1d=4)
        coarse_error = l2_relative_error(self.disc,
                                         self.disc.project(self.wave),
                                         self.wave)
        fine_error = l2_relative_error(fine, fine.project(self.wave),
                                       self.wave)
        self.assertLess(fine_error, coarse_error / 3.0)


class GlobalOperatorTestCase(DirectoryTestCase):

    def setUp(self):
        super(GlobalOperatorTestCase, self).setUp()
        self.disc = scaled_discretization(self.material, k1d=1, N=1)

    def test_matches_rhs(self):
        matrix = assemble_global_operator(self.disc)
        self.assertEqual(matrix.shape, (self.disc.ndofs, self.disc.ndofs))
        for seed in range(10):
            state = random_state(self.disc, seed)
            np.testing.assert_allclose(
                matrix @ state.values.ravel(),
                self.disc.rhs(state, sources=False).ravel(),
                rtol=0.0, atol=1e-12 * np.abs(matrix).max())

    def test_matrix_free_action(self):
        matrix = assemble_global_operator(self.disc)
        operator = operator_action(self.disc)
        x = np.random.default_rng(4).standard_normal(self.disc.ndofs)
        np.testing.assert_allclose(operator.matvec(x), matrix @ x,
                                   atol=1e-12 * np.abs(matrix).max())

    def test_size_guard(self):
        with mock.patch.object(settings, 'MAX_DENSE_DOFS', 10):
            with self.assertRaises(SizeGuardError) as ctx:
                assemble_global_operator(self.disc)
        self.assertEqual(ctx.exception.size, self.disc.ndofs)

    def test_central_flux_spectrum_is_imaginary(self):
        disc = scaled_discretization(self.material.inviscid(), k1d=2, N=1,
                                     boundary='periodic', alpha_tau=0.0,
                                     alpha_v=0.0)
        result = operator_spectrum(disc, alpha=0.0)
        self.assertLessEqual(np.abs(result.eigenvalues.real).max(),
                             1e-10 * result.radius)

    def test_spectral_radius_estimate(self):
        self.assertEqual(spectral_radius_estimate(np.zeros((5, 5))), 0.0)
        matrix = np.random.default_rng(5).standard_normal((30, 30))
        radius = spectral_radius_estimate(matrix)
        self.assertAlmostEqual(
            radius / np.abs(np.linalg.eigvals(matrix)).max(), 1.0, places=8)
        self.assertAlmostEqual(spectral_radius_estimate(-3.0 * matrix)
                               / radius, 3.0, places=8)

    def test_estimate_agrees_with_dense_radius(self):
        disc = scaled_discretization(self.material, k1d=2, N=2)
        result = operator_spectrum(disc, alpha=1.0)
        self.assertLess(abs(result.estimate - result.radius),
                        1e-6 * result.radius)
        self.assertLessEqual(result.max_real, 1e-10 * result.radius)

    @pytest.mark.slow
    def test_penalty_orders_spectral_radius(self):
        directory = self.directory
        config = self.config(
            run={'experiment': 'spectra', 'N': '3', 'mode': 'full13'},
            mesh={'k1d': '2'},
            flux={'alphas': '0, 0.5, 1'})
        results = spectra(config, directory)
        radii = [result.radius for result in results]
        self.assertLess(radii[0], radii[1])
        self.assertLess(radii[1], radii[2])
        for result in results:
            self.assertLessEqual(result.max_real, 1e-10 * result.radius)
        rows = read_csv(os.path.join(directory, 'spectra.csv'))
        self.assertEqual(rows[0], ['alpha', 'radius', 'max_real',
                                   'estimate'])
        self.assertEqual(len(rows), 4)
        self.assertTrue(os.path.exists(os.path.join(
            directory, 'eigenvalues_alpha0.5.csv')))

    @pytest.mark.slow
    def test_spectral_radius_scales_with_inverse_h(self):
        radii = []
        for k1d in ('2', '4'):
            config = self.config(
                run={'experiment': 'spectra', 'N': '3'},
                mesh={'k1d': k1d}, flux={'alphas': '1'})
            radii.append(spectra(config, self.directory)[0].radius)
        self.assertGreaterEqual(radii[1] / radii[0], 1.4)
        self.assertLessEqual(radii[1] / radii[0], 2.6)


class EnergyAuditTestCase(DirectoryTestCase):

    def test_decreasing_trace_passes(self):
        audit = audit_energy_trace([(0, 0.0, 2.0), (1, 0.1, 1.5),
                                    (2, 0.2, 1.5)])
        self.assertTrue(audit.passed)
        self.assertEqual(audit.step, -1)

    def test_growth_reported(self):
        audit = audit_energy_trace([(0, 0.0, 2.0), (1, 0.1, 1.0),
                                    (2, 0.2, 1.1), (3, 0.3, 1.0)])
        self.assertFalse(audit.passed)
        self.assertEqual(audit.step, 2)
        self.assertAlmostEqual(audit.worst, 0.1)

    def test_trace_file(self):
        path = os.path.join(self.directory, 'energy.csv')
        with EnergyTrace(path) as trace:
            trace.append(0, 0.0, 1.0)
            trace.append(1, 0.5, 1.0 + 1e-12)
        self.assertTrue(audit_energy_trace(path).passed)
        self.assertFalse(audit_energy_trace(path, tolerance=0.0).passed)

    def test_missing_trace_file(self):
        with self.assertRaises(OutputError):
            audit_energy_trace(os.path.join(self.directory, 'missing.csv'))


class ConvergenceTestCase(DirectoryTestCase):

    def test_small_study(self):
        config = self.config(
            run={'experiment': 'converge', 'N': '2'},
            mesh={'levels': '2, 4, 8', 'boundary': 'exact'},
            material={'inviscid': 'true'},
            time={'final_time': '0.05'})
        report = run_convergence(config, self.directory)
        self.assertEqual([level.k1d for level in report.levels], [2, 4, 8])
        self.assertTrue(all(a > b for a, b in zip(report.errors,
                                                  report.errors[1:])))
        self.assertEqual(len(report.rates), 2)
        self.assertFalse(report.metadata['viscous'])
        rows = read_csv(os.path.join(self.directory, 'convergence.csv'))
        self.assertEqual(tuple(rows[0]), report.header)
        self.assertEqual(len(rows), 4)
        self.assertEqual(rows[1][4], '')

    def test_default_boundary_converges(self):
        config = self.config(
            run={'experiment': 'converge', 'N': '2'},
            mesh={'levels': '2, 4, 8'},
            material={'inviscid': 'true'},
            time={'final_time': '0.05'})
        self.assertEqual(config['mesh.boundary'], 'exact')
        report = run_convergence(config, self.directory)
        self.assertTrue(all(a > b for a, b in zip(report.errors,
                                                  report.errors[1:])))
        self.assertGreaterEqual(report.fitted_rate(), 2.0)

    def test_concurrent_levels_match(self):
        config = self.config(
            run={'experiment': 'converge', 'N': '1'},
            mesh={'levels': '1, 2, 3', 'boundary': 'exact'},
            time={'final_time': '0.02'})
        serial = run_convergence(config, jobs=1)
        threaded = run_convergence(config, jobs=3)
        np.testing.assert_allclose(threaded.errors, serial.errors,
                                   rtol=1e-14)

    def test_rates(self):
        levels = [ConvergenceLevel(N=2, k1d=k1d, h=1.0 / k1d,
                                   error=5.0 / k1d ** 3, dofs=0, steps=1,
                                   dt=0.1, seconds=0.0)
                  for k1d in (2, 4, 8)]
        report = ConvergenceReport(levels)
        np.testing.assert_allclose(report.rates, [3.0, 3.0])
        self.assertAlmostEqual(report.fitted_rate(), 3.0)
        with self.assertRaises(ConfigurationError):
            ConvergenceReport(levels[:1]).fitted_rate()

    @pytest.mark.slow
    def test_penalty_flux_rate(self):
        config = self.config(
            run={'experiment': 'converge', 'N': '2'},
            mesh={'levels': '2, 4, 8, 16', 'boundary': 'exact'},
            material={'inviscid': 'true'},
            time={'final_time': '0.25'})
        report = run_convergence(config, self.directory)
        self.assertGreaterEqual(report.fitted_rate(), 2.8)

    @pytest.mark.slow
    def test_central_flux_rate(self):
        config = self.config(
            run={'experiment': 'converge', 'N': '3'},
            mesh={'levels': '2, 4, 8, 16', 'boundary': 'exact'},
            material={'inviscid': 'true'},
            flux={'alpha_tau': '0', 'alpha_v': '0'},
            time={'final_time': '0.25'})
        report = run_convergence(config, self.directory)
        self.assertGreaterEqual(report.fitted_rate(), 3.0)

    def viscid_rate(self, N, scheme='unified', alpha='1'):
        config = self.config(
            run={'experiment': 'converge', 'N': str(N)},
            mesh={'levels': '2, 4, 8, 16'},
            flux={'alpha_tau': alpha, 'alpha_v': alpha},
            time={'final_time': '0.25', 'scheme': scheme})
        report = run_convergence(config, self.directory)
        self.assertTrue(report.metadata['viscous'])
        self.assertEqual(report.metadata['scheme'], scheme)
        return report.fitted_rate()

    @pytest.mark.slow
    def test_viscid_unified_rate(self):
        self.assertGreaterEqual(self.viscid_rate(2), 2.6)

    @pytest.mark.slow
    def test_strang_matches_unified_rate(self):
        unified = self.viscid_rate(2, 'unified')
        strang = self.viscid_rate(2, 'strang')
        self.assertAlmostEqual(strang, unified, delta=0.3)

    @pytest.mark.slow
    def test_central_flux_even_odd_pattern(self):
        self.assertLessEqual(self.viscid_rate(1, alpha='0'), 1.5)
        self.assertGreaterEqual(self.viscid_rate(2, alpha='0'), 2.0)

    @pytest.mark.slow
    def test_strang_is_second_order_in_time(self):
        disc = scaled_discretization(self.material, boundary='periodic',
                                     mode='compact2d', scheme='strang')
        wave = plane_wave_solution(nondimensionalize(self.material),
                                   (2 * math.pi, 2 * math.pi),
                                   fields=active_fields('compact2d', 'xy'))
        _, orders = temporal_refinement(disc, disc.project(wave), 0.2,
                                        (32, 64, 128))
        self.assertAlmostEqual(orders[-1], 2.0, delta=0.2)


class SimulationTestCase(DirectoryTestCase):

    def simulate(self, **sections):
        sections.setdefault('run', {}).setdefault('units', 'scaled')
        sections.setdefault('mesh', {}).setdefault('k1d', '2')
        sections['run'].setdefault('N', '2')
        sections.setdefault('time', {}).setdefault('final_time', '0.1')
        config = self.config(**sections)
        return run_simulation(config, self.directory)

    def test_zero_data_stays_zero(self):
        result = self.simulate(receivers={'points': '0.25,0.25; 0.6,0.3'},
                               output={'snapshot_every': '2'})
        self.assertFalse(np.any(result.state.values))
        self.assertFalse(np.any(result.energy.energies))
        self.assertTrue(result.audit.passed)
        for path in (os.path.join(self.directory, 'receiver_000.csv'),
                     os.path.join(self.directory, 'receiver_001.csv')):
            rows = read_csv(path)
            self.assertEqual(rows[0][:3], ['t', 'tau11', 'tau22'])
            self.assertEqual(rows[0][-3:], ['b1', 'b2', 'b3'])
            self.assertTrue(all(float(x) == 0.0 for row in rows[1:]
                                for x in row[1:]))
        self.assertTrue(os.path.exists(os.path.join(self.directory,
                                                    'final.vtk')))
        self.assertTrue(os.path.exists(os.path.join(
            self.directory, 'snapshot_000002.vtk')))

    def test_energy_trace_and_manifest(self):
        result = self.simulate(wave={'initial': 'planewave'})
        energies = read_csv(os.path.join(self.directory, 'energy.csv'))
        self.assertEqual(energies[0], ['step', 't', 'energy'])
        self.assertEqual(len(energies) - 1, len(result.energy.rows))
        self.assertTrue(result.audit.passed)
        events = read_manifest(os.path.join(self.directory,
                                            'manifest.jsonl'))
        self.assertEqual([e['event'] for e in events],
                         ['start', 'setup', 'finish'])
        self.assertEqual(events[0]['experiment'], 'simulate')
        self.assertIn('numpy', events[0]['versions'])
        self.assertEqual(events[0]['config']['run']['units'], 'scaled')
        self.assertAlmostEqual(events[-1]['t'], 0.1)

    def test_point_source_excites_the_medium(self):
        result = self.simulate(source={'location': '0.45, 0.3',
                                       'frequency': '5',
                                       'weights': 'p:1'},
                               receivers={'points': '0.4,0.4'})
        self.assertGreater(result.energy.energies[-1], 0.0)
        self.assertIsNone(result.audit)
        rows = read_csv(os.path.join(self.directory, 'receiver_000.csv'))
        self.assertTrue(any(float(x) != 0.0 for x in rows[-1][1:]))

    def test_divergence_writes_diagnostics(self):
        error = SolverDivergedError(3, 0.05)
        with mock.patch('porowave.experiments.TimeStepper.advance',
                        side_effect=error):
            with self.assertRaises(SolverDivergedError):
                self.simulate()
        self.assertTrue(os.path.exists(os.path.join(self.directory,
                                                    'diverged.vtk')))
        events = read_manifest(os.path.join(self.directory,
                                            'manifest.jsonl'))
        self.assertEqual(events[-1]['event'], 'diverged')
        self.assertEqual(events[-1]['element'], 3)


class TablesTestCase(DirectoryTestCase):

    def test_materials_table(self):
        rows = materials_table(directory=self.directory)
        self.assertEqual(sorted(row[0] for row in rows), sorted(PRESETS))
        for row in rows:
            fast, shear, slow = row[6:9]
            self.assertGreater(fast, shear)
            self.assertGreater(fast, slow)
            self.assertGreater(slow, 0.0)
        written = read_csv(os.path.join(self.directory, 'materials.csv'))
        self.assertEqual(len(written), len(PRESETS) + 1)

    def test_dispersion_is_deterministic(self):
        config = self.config(run={'experiment': 'dispersion'},
                             dispersion={'angles': '4', 'frequency': '50'})
        rows = run_dispersion(config, self.directory)
        self.assertEqual(len(rows), 12)
        path = os.path.join(self.directory, 'dispersion.csv')
        with open(path, 'rb') as handle:
            first = handle.read()
        run_dispersion(config, self.directory)
        with open(path, 'rb') as handle:
            self.assertEqual(handle.read(), first)

    def test_run_experiment_writes_manifest(self):
        config = self.config(run={'experiment': 'materials'})
        run_experiment(config)
        events = read_manifest(os.path.join(self.directory,
                                            'manifest.jsonl'))
        self.assertEqual([e['event'] for e in events], ['start', 'finish'])
        self.assertEqual(events[0]['experiment'], 'materials')


class HeterogeneityTestCase(DirectoryTestCase):

    def run_comparison(self, N, k1d):
        config = self.config(
            run={'experiment': 'heterogeneity', 'N': str(N),
                 'units': 'scaled'},
            mesh={'k1d': str(k1d), 'boundary': 'periodic'},
            material={'modulation': 'sine'},
            time={'final_time': '0.1'})
        return heterogeneity_comparison(config, self.directory)

    def test_pointwise_and_averaged_runs_differ(self):
        result = self.run_comparison(2, 2)
        self.assertGreater(result.difference, 0.0)
        self.assertEqual(result.N, 2)
        self.assertTrue(os.path.exists(os.path.join(
            self.directory, 'heterogeneity_element_average.vtk')))

    @pytest.mark.slow
    def test_sub_element_variation_matters_more_at_high_order(self):
        high = self.run_comparison(8, 16)
        low = self.run_comparison(2, 64)
        self.assertGreater(high.difference, 10.0 * low.difference)
