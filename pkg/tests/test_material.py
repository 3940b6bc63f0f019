import os
import tempfile

import numpy as np

from porowave.exceptions import (FieldEvaluationError, MaterialError,
                                 UnknownPresetError)
from porowave.material import (GPA, PRESETS, ElementField, ModulatedField,
                               PoroelasticMaterial, RegionField, UniformField,
                               derive, evaluate_field, evaluate_points,
                               load_material, max_wave_speed,
                               nondimensionalize, preset, scales,
                               sine_modulation, system_matrices)
from porowave.mesh import UniformGridSpec, build_uniform
from porowave.refelem import build_reference

from . import BaseTestCase

SANDSTONE_FILE = """\
# isotropic sandstone
name = sandstone_isotropic
symmetry = transverse
K_s = 40 GPa
rho_s = 2500
c11 = 36 GPa
c12 = 12 GPa
c13 = 12 GPa
c33 = 36 GPa
c55 = 12 GPa
phi = 0.2
kappa1 = 600 1e-15m2
kappa3 = 600 1e-15m2
T1 = 2
T3 = 2
K_f = 2.5 GPa
rho_f = 1040 kg/m3
eta = 1 cp
"""


class DeriveTestCase(BaseTestCase):

    def test_isotropic_sandstone(self):
        derived = derive(self.material)
        self.assertAlmostEqual(derived.rho, 2208.0)
        self.assertAlmostEqual(derived.m[0], 10400.0)
        self.assertAlmostEqual(derived.beta[0],
                               2208.0 * 10400.0 - 1040.0 ** 2)
        self.assertAlmostEqual(derived.K_star, 20.0 * GPA, delta=1.0)
        for alpha in derived.alpha:
            self.assertAlmostEqual(alpha, 0.5)
        self.assertAlmostEqual(derived.M, 40.0 * GPA / 3.5, delta=1e-3)
        omega_c = 1e-3 * 0.2 / (1040.0 * 2.0 * 600e-15)
        self.assertAlmostEqual(derived.omega_c / omega_c, 1.0, places=12)

    def test_inviscid_has_no_cutoff(self):
        derived = derive(self.material.inviscid())
        self.assertEqual(derived.omega_c, 0.0)

    def test_biot_coefficient_out_of_range(self):
        with self.assertRaises(MaterialError) as ctx:
            derive(self.material.replace(K_s=10.0 * GPA))
        self.assertEqual(ctx.exception.direction, 1)

    def test_invalid_properties(self):
        with self.assertRaises(MaterialError):
            self.material.replace(phi=1.0)
        with self.assertRaises(MaterialError):
            self.material.replace(T=(0.5, 1.0, 1.0))
        with self.assertRaises(MaterialError):
            self.material.replace(eta=-1.0)
        with self.assertRaises(MaterialError):
            self.material.replace(kappa=(1.0, 2.0, 3.0, 4.0))

    def test_stiffness_symmetry(self):
        C = self.material.stiffness
        np.testing.assert_array_equal(C, C.T)
        self.assertAlmostEqual(C[5, 5], 12.0 * GPA)


class SystemMatricesTestCase(BaseTestCase):

    def test_closed_form_inverses(self):
        for name in PRESETS:
            system = system_matrices(preset(name))
            np.testing.assert_allclose(system.Qs @ system.Qs_inv, np.eye(7),
                                       atol=1e-12)
            np.testing.assert_allclose(system.Qv @ system.Qv_inv, np.eye(6),
                                       atol=1e-12)

    def test_inviscid_dissipation_is_zero(self):
        system = system_matrices(self.material.inviscid())
        self.assertFalse(np.any(system.D))
        self.assertFalse(np.any(system.blocks['D']))

    def test_dissipation_negative_semidefinite(self):
        for name in PRESETS:
            D = system_matrices(preset(name)).D
            bound = 1e-12 * max(np.abs(D).max(), 1.0)
            self.assertTrue(np.all(np.linalg.eigvalsh(D) <= bound))

    def test_first_order_blocks_match_symmetric_form(self):
        for name in PRESETS:
            system = system_matrices(preset(name))
            for axis, key in enumerate('ABC'):
                A_i = system.A[axis]
                expected = np.zeros((13, 13))
                expected[:7, 7:] = -system.Qs_inv @ A_i
                expected[7:, :7] = -system.Qv_inv @ A_i.T
                block = system.blocks[key]
                scale = np.abs(expected).max()
                np.testing.assert_allclose(block / scale, expected / scale,
                                           rtol=0.0, atol=1e-12)
            expected = np.zeros((13, 13))
            expected[7:, 7:] = system.Qv_inv_D
            scale = max(np.abs(expected).max(), 1.0)
            np.testing.assert_allclose(system.blocks['D'] / scale,
                                       expected / scale, rtol=0.0,
                                       atol=1e-12)

    def test_diffusive_rates_decay(self):
        for name in PRESETS:
            material = preset(name)
            if material.eta == 0.0:
                continue
            QvD = system_matrices(material).Qv_inv_D
            self.assertTrue(np.all(np.diagonal(QvD)[3:] < 0.0))
            self.assertTrue(np.all(np.diagonal(QvD)[:3] == 0.0))

    def test_matrices_are_read_only(self):
        system = system_matrices(self.material)
        with self.assertRaises(ValueError):
            system.Qs[0, 0] = 1.0


class ScalingTestCase(BaseTestCase):

    def test_scales(self):
        ref = scales(self.material, length=10.0)
        self.assertAlmostEqual(ref['density'], 2208.0)
        self.assertAlmostEqual(ref['speed'], np.sqrt(36.0 * GPA / 2208.0))
        self.assertAlmostEqual(ref['time'], 10.0 / ref['speed'])

    def test_nondimensional_units(self):
        scaled = nondimensionalize(self.material)
        self.assertAlmostEqual(derive(scaled).rho, 1.0, places=13)
        self.assertAlmostEqual(scaled.c11, 1.0, places=13)
        self.assertAlmostEqual(derive(scaled).alpha[0], 0.5, places=13)
        speed = max_wave_speed(self.material) / scales(self.material)['speed']
        self.assertAlmostEqual(max_wave_speed(scaled), speed, places=10)

    def test_wave_speed_exceeds_drained_speed(self):
        drained = np.sqrt(self.material.c11 / derive(self.material).rho)
        self.assertGreater(max_wave_speed(self.material), drained)


class PresetTestCase(BaseTestCase):

    def test_table_values(self):
        self.assertEqual(self.material.K_s, 40.0 * GPA)
        np.testing.assert_allclose(self.material.kappa, 600e-15, rtol=1e-15)
        shale = preset('shale_isotropic')
        self.assertEqual(shale.phi, 0.16)
        self.assertEqual(preset('medium_II').eta, 0.0)

    def test_all_presets_derive(self):
        for name in PRESETS:
            derived = derive(preset(name))
            self.assertTrue(all(b > 0.0 for b in derived.beta))
            self.assertGreater(derived.M, 0.0)

    def test_unknown_preset(self):
        with self.assertRaises(UnknownPresetError) as ctx:
            preset('granite')
        self.assertIn('sandstone_isotropic', ctx.exception.available)


class MaterialFileTestCase(BaseTestCase):

    def setUp(self):
        super(MaterialFileTestCase, self).setUp()
        handle, self.path = tempfile.mkstemp(suffix='.mat')
        os.close(handle)

    def tearDown(self):
        os.remove(self.path)

    def write(self, text):
        with open(self.path, 'w', encoding='utf-8') as handle:
            handle.write(text)

    def test_load_matches_preset(self):
        self.write(SANDSTONE_FILE)
        self.assertEqual(load_material(self.path), self.material)

    def test_isotropic_moduli(self):
        self.write(SANDSTONE_FILE.replace('symmetry = transverse',
                                          'symmetry = isotropic\n'
                                          'K_fr = 20 GPa\nmu_fr = 12 GPa'))
        loaded = load_material(self.path)
        self.assertAlmostEqual(loaded.c11 / self.material.c11, 1.0,
                               places=14)
        self.assertAlmostEqual(loaded.c12 / self.material.c12, 1.0,
                               places=14)

    def test_unit_not_valid_for_key(self):
        self.write(SANDSTONE_FILE.replace('phi = 0.2', 'phi = 0.2 GPa'))
        with self.assertRaises(MaterialError) as ctx:
            load_material(self.path)
        self.assertEqual(ctx.exception.lineno, 11)

    def test_unknown_key(self):
        self.write(SANDSTONE_FILE + 'colour = red\n')
        with self.assertRaises(MaterialError):
            load_material(self.path)

    def test_missing_property(self):
        self.write(SANDSTONE_FILE.replace('K_f = 2.5 GPa\n', ''))
        with self.assertRaises(MaterialError) as ctx:
            load_material(self.path)
        self.assertIn('K_f', ctx.exception.message)


class CoefficientFieldTestCase(BaseTestCase):

    def setUp(self):
        super(CoefficientFieldTestCase, self).setUp()
        self.mesh = build_uniform(UniformGridSpec(2, 2))
        self.ref = build_reference(2, 2)
        self.system = system_matrices(self.material)

    def test_uniform_field(self):
        tables = evaluate_field(UniformField(self.material), self.mesh,
                                self.ref)
        self.assertEqual(tables.Qs_inv.shape, (self.mesh.K, self.ref.Nq, 7, 7))
        self.assertTrue(tables.element_constant)
        self.assertTrue(np.all(tables.Qs_inv == self.system.Qs_inv))
        self.assertTrue(np.all(tables.Qv_inv == self.system.Qv_inv))
        for value in tables.bounds.values():
            self.assertTrue(np.isfinite(value))
        self.assertLessEqual(tables.s_min, tables.s_max)

    def test_element_field(self):
        labels = np.arange(self.mesh.K) % 2
        field = ElementField([self.material, preset('shale_isotropic')],
                             labels)
        tables = evaluate_field(field, self.mesh, self.ref)
        self.assertTrue(tables.element_constant)
        shale = system_matrices(preset('shale_isotropic'))
        np.testing.assert_array_equal(tables.Qs_inv[1, 0], shale.Qs_inv)
        np.testing.assert_array_equal(tables.Qs_inv[0, -1],
                                      self.system.Qs_inv)

    def test_region_field(self):
        field = RegionField([self.material, preset('epoxy_glass')],
                            lambda x: (x[:, 0] > 0.5).astype(int))
        tables = evaluate_field(field, self.mesh, self.ref)
        self.assertEqual(set(np.unique(tables.labels)), {0, 1})
        self.assertTrue(tables.element_constant)

    def test_region_field_bad_labels(self):
        field = RegionField([self.material], lambda x: x[:, 0])
        with self.assertRaises(FieldEvaluationError):
            evaluate_field(field, self.mesh, self.ref)

    def test_modulated_field(self):
        factor = sine_modulation()
        field = ModulatedField(UniformField(self.material), factor)
        tables = evaluate_field(field, self.mesh, self.ref)
        self.assertFalse(tables.element_constant)

        centroids = self.mesh.element_vertices.mean(axis=1)
        elements = np.arange(self.mesh.K)
        _, Qv_inv, Qv_inv_D = evaluate_points(field, centroids, elements)
        direct = self.system.Qv_inv / factor(centroids)[:, None, None]
        np.testing.assert_allclose(Qv_inv, direct, rtol=1e-14, atol=0.0)

        xq = self.mesh.map_points(self.ref.quad_points)
        np.testing.assert_allclose(
            tables.scale, factor(xq.reshape(-1, 2)).reshape(xq.shape[:2]),
            rtol=1e-14)

    def test_element_average_mode(self):
        factor = sine_modulation()
        field = ModulatedField(UniformField(self.material), factor,
                               mode='element_average')
        tables = evaluate_field(field, self.mesh, self.ref)
        self.assertTrue(tables.element_constant)
        xq = self.mesh.map_points(self.ref.quad_points)
        values = factor(xq.reshape(-1, 2)).reshape(xq.shape[:2])
        average = values @ self.ref.quad_weights / self.ref.quad_weights.sum()
        np.testing.assert_allclose(tables.scale[:, 0], average, rtol=1e-14)

    def test_non_positive_modulation(self):
        field = ModulatedField(UniformField(self.material),
                               lambda x: x[:, 0] - 0.5)
        with self.assertRaises(FieldEvaluationError) as ctx:
            evaluate_field(field, self.mesh, self.ref)
        self.assertLessEqual(ctx.exception.point[0], 0.5)

    def test_failing_modulation_reports_point(self):
        def factor(points):
            if np.any(points[:, 0] > 0.9):
                raise ValueError('outside calibration range')
            return np.ones(len(points))

        field = ModulatedField(UniformField(self.material), factor)
        with self.assertRaises(FieldEvaluationError) as ctx:
            evaluate_field(field, self.mesh, self.ref)
        self.assertGreater(ctx.exception.point[0], 0.9)
        self.assertIn('calibration', ctx.exception.message)

    def test_unknown_modulation_mode(self):
        with self.assertRaises(MaterialError):
            ModulatedField(UniformField(self.material), sine_modulation(),
                           mode='nodal')

    def test_material_class_constructor(self):
        material = PoroelasticMaterial.isotropic(
            K_s=40 * GPA, rho_s=2500.0, K_fr=20 * GPA, mu_fr=12 * GPA,
            phi=0.2, kappa=600e-15, T=2.0, K_f=2.5 * GPA, rho_f=1040.0,
            eta=1e-3)
        self.assertEqual(material.kappa, (600e-15,) * 3)
        self.assertAlmostEqual(material.c44, 12 * GPA)
