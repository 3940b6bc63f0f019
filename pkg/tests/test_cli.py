import io
import json
import logging
import os
import tempfile
from contextlib import redirect_stderr, redirect_stdout

import numpy as np

from porowave import settings
from porowave.cli import build_parser, configure_logging, main, \
    overrides_from_args
from porowave.refelem import build_reference

from . import BaseTestCase


class ParserTestCase(BaseTestCase):

    def test_overrides(self):
        args = build_parser().parse_args(
            ['spectra', '--N', '2', '--K1D', '4', '--alpha-tau', '0.5',
             '--boundary', 'periodic'])
        self.assertEqual(overrides_from_args(args), {
            'run.experiment': 'spectra', 'run.N': 2, 'mesh.k1d': 4,
            'flux.alpha_tau': 0.5, 'mesh.boundary': 'periodic'})

    def test_no_overrides(self):
        args = build_parser().parse_args([])
        self.assertEqual(overrides_from_args(args), {})

    def test_experiment_choices(self):
        with redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit):
                build_parser().parse_args(['plot'])

    def test_logging_levels(self):
        root = logging.getLogger()
        saved = root.handlers[:], root.level
        try:
            configure_logging(verbose=2)
            self.assertEqual(root.level, logging.DEBUG)
            configure_logging(verbose=1)
            self.assertEqual(root.level, logging.INFO)
            configure_logging(quiet=True)
            self.assertEqual(root.level, logging.ERROR)
        finally:
            root.handlers, root.level = saved[0], saved[1]


class MainTestCase(BaseTestCase):

    def setUp(self):
        super(MainTestCase, self).setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.directory = self._tmp.name
        root = logging.getLogger()
        self._logging = root.handlers[:], root.level

    def tearDown(self):
        root = logging.getLogger()
        root.handlers, root.level = self._logging
        self._tmp.cleanup()

    def run_main(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(list(argv) + ['--quiet'])
        return code, out.getvalue(), err.getvalue()

    def test_dump_refelem(self):
        code, out, _ = self.run_main('--dump-refelem', '--dim', '2', '--N',
                                     '3')
        self.assertEqual(code, 0)
        summary = json.loads(out)
        self.assertEqual(summary['Np'], 10)
        self.assertEqual(summary['nfaces'], 3)
        self.assertAlmostEqual(summary['quadrature_weight_sum'], 2.0)

    def test_dump_refelem_matrices(self):
        code, out, _ = self.run_main('--dump-refelem', '--dim', '2', '--N',
                                     '3', '--out', self.directory)
        self.assertEqual(code, 0)
        names = sorted(os.path.basename(path)
                       for path in json.loads(out)['files'])
        self.assertEqual(names, ['Dr.csv', 'Ds.csv', 'Pq.csv', 'Vq.csv',
                                 'lift_face0.csv', 'lift_face1.csv',
                                 'lift_face2.csv', 'mass.csv'])
        mass = np.loadtxt(os.path.join(self.directory, 'mass.csv'),
                          delimiter=',', skiprows=1)
        np.testing.assert_allclose(mass, build_reference(2, 3).mass,
                                   rtol=0, atol=1e-15)

    def test_materials(self):
        code, out, _ = self.run_main('materials', '--out', self.directory)
        self.assertEqual(code, 0)
        self.assertGreater(json.loads(out)['rows'], 0)
        self.assertTrue(os.path.exists(os.path.join(self.directory,
                                                    'materials.csv')))

    def test_validation_error_exit_code(self):
        code, out, err = self.run_main('materials', '--N', '12')
        self.assertEqual(code, 2)
        self.assertEqual(out, '')
        payload = json.loads(err)
        self.assertEqual(payload['code'], settings.VALIDATION_FAILED_CODE)
        self.assertEqual(payload['errors'][0]['field'], 'run.N')
        self.assertEqual(payload['context'], {'experiment': 'materials'})

    def test_missing_material_file(self):
        code, _, err = self.run_main(
            'materials', '--material-file',
            os.path.join(self.directory, 'missing.mat'))
        self.assertEqual(code, 2)
        self.assertIn('does not exist', err)

    def test_unknown_preset(self):
        code, _, err = self.run_main('dispersion', '--material', 'granite',
                                     '--out', self.directory)
        self.assertEqual(code, 1)
        payload = json.loads(err)
        self.assertEqual(payload['code'],
                         settings.ERROR_CODES['UnknownPresetError'])

    def test_config_file(self):
        path = os.path.join(self.directory, 'run.ini')
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write('[run]\nexperiment = dispersion\n\n'
                         '[dispersion]\nangles = 2\nfrequency = 50\n')
        code, out, _ = self.run_main('--config', path, '--out',
                                     self.directory)
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out), {'rows': 6})
