import os
import tempfile

from porowave.config import RunConfig, load_config
from porowave.exceptions import ConfigurationError, ValidationError
from porowave.settings import (FRIENDLY_CONFIG_ERRORS,
                               FRIENDLY_NON_FIELD_ERRORS,
                               VALIDATION_FAILED_CODE,
                               VALIDATION_FAILED_MESSAGE)

from . import BaseTestCase


def run_is_valid(data, overrides=None):
    config = RunConfig.from_dict(data, overrides=overrides)
    config.is_valid()
    return config


class SanityTestCase(BaseTestCase):

    def test_defaults_valid(self):
        config = RunConfig.from_dict({})
        self.assertTrue(config.is_valid())
        self.assertEqual(config['run.N'], 3)
        self.assertEqual(config['N'], 3)
        self.assertEqual(config.section('mesh')['extent'], (1.0, 1.0))

    def test_config_invalid(self):
        config = RunConfig.from_dict({'run': {'N': 'three'}})
        self.assertFalse(config.is_valid())

    def test_validated_data_requires_is_valid(self):
        config = RunConfig.from_dict({})
        with self.assertRaises(AssertionError):
            config.validated_data

    def test_ambiguous_key(self):
        config = run_is_valid({})
        with self.assertRaises(KeyError):
            config['file']


class ConfigErrorsTestCase(BaseTestCase):

    def test_error_payload(self):
        config = run_is_valid({'run': {'N': 'three'}})
        errors = config.errors
        self.assertEqual(errors['code'], VALIDATION_FAILED_CODE)
        self.assertEqual(errors['message'], VALIDATION_FAILED_MESSAGE)
        self.assertEqual(type(errors['errors']), list)

    def test_int_field_error_content(self):
        config = run_is_valid({'run': {'N': 'three'}})
        error = config.errors['errors'][0]
        self.assertEqual(error['code'], FRIENDLY_CONFIG_ERRORS['int']
                         ['invalid'])
        self.assertEqual(error['field'], 'run.N')
        self.assertEqual(error['message'], 'A valid int is required.')

    def test_min_value(self):
        config = run_is_valid({'run': {'N': '0'}})
        error = config.errors['errors'][0]
        self.assertEqual(error['code'], FRIENDLY_CONFIG_ERRORS['int']
                         ['min_value'])
        self.assertEqual(error['message'],
                         'Ensure this value is greater than or equal to 1.')

    def test_max_value(self):
        config = run_is_valid({'run': {'N': '9'}})
        error = config.errors['errors'][0]
        self.assertEqual(error['code'], FRIENDLY_CONFIG_ERRORS['int']
                         ['max_value'])

    def test_invalid_choice(self):
        config = run_is_valid({'time': {'scheme': 'euler'}})
        error = config.errors['errors'][0]
        self.assertEqual(error['code'], FRIENDLY_CONFIG_ERRORS['choice']
                         ['invalid_choice'])
        self.assertEqual(error['field'], 'time.scheme')
        self.assertEqual(error['message'], '"euler" is not a valid choice.')

    def test_invalid_bool(self):
        config = run_is_valid({'material': {'inviscid': 'maybe'}})
        error = config.errors['errors'][0]
        self.assertEqual(error['code'], FRIENDLY_CONFIG_ERRORS['bool']
                         ['invalid'])

    def test_missing_file(self):
        path = os.path.join(tempfile.gettempdir(), 'porowave-missing.mat')
        config = run_is_valid({'material': {'file': path}})
        error = config.errors['errors'][0]
        self.assertEqual(error['code'], FRIENDLY_CONFIG_ERRORS['path']
                         ['does_not_exist'])
        self.assertEqual(error['message'], 'File "%s" does not exist.' % path)

    def test_float_sequence(self):
        config = run_is_valid({'mesh': {'extent': '1, two'}})
        error = config.errors['errors'][0]
        self.assertEqual(error['code'], FRIENDLY_CONFIG_ERRORS['floats']
                         ['invalid'])

    def test_all_errors_collected(self):
        config = run_is_valid({'run': {'N': 'x'},
                               'time': {'scheme': 'euler', 'cfl': '-1'}})
        fields = sorted(e['field'] for e in config.errors['errors'])
        self.assertEqual(fields, ['run.N', 'time.cfl', 'time.scheme'])

    def test_unknown_section(self):
        config = run_is_valid({'solver': {'N': '2'}})
        error = config.errors['errors'][0]
        self.assertEqual(error['code'],
                         FRIENDLY_NON_FIELD_ERRORS['unknown_section'])
        self.assertIsNone(error['field'])

    def test_unknown_key(self):
        config = run_is_valid({'run': {'order': '2'}})
        error = config.errors['errors'][0]
        self.assertEqual(error['code'],
                         FRIENDLY_NON_FIELD_ERRORS['unknown_key'])
        self.assertEqual(error['message'],
                         'Unknown key "order" in section "[run]".')


class ConflictTestCase(BaseTestCase):

    def test_compact_mode_needs_2d(self):
        config = run_is_valid({'run': {'dim': '3', 'mode': 'compact2d'}})
        error = config.errors['errors'][0]
        self.assertEqual(error['code'], FRIENDLY_NON_FIELD_ERRORS['conflict'])
        self.assertEqual(error['field'], 'run.mode')

    def test_three_dimensional_defaults_broadcast(self):
        config = run_is_valid({'run': {'dim': '3', 'mode': 'full13'}})
        self.assertFalse(config.errors)
        self.assertEqual(config['mesh.extent'], (1.0, 1.0, 1.0))
        self.assertEqual(config['mesh.origin'], (0.0, 0.0, 0.0))
        self.assertEqual(config['wave.wavenumber'], (1.0, 1.0, 1.0))

    def test_explicit_extent_length(self):
        config = run_is_valid({'mesh': {'extent': '1, 2, 3'}})
        self.assertEqual(config.errors['errors'][0]['field'], 'mesh.extent')

    def test_convergence_levels(self):
        config = run_is_valid({'run': {'experiment': 'converge'},
                               'mesh': {'levels': '2, 4'}})
        self.assertEqual(config.errors['errors'][0]['field'], 'mesh.levels')

    def test_convergence_defaults_to_exact_boundary(self):
        config = run_is_valid({'run': {'experiment': 'converge'}})
        self.assertFalse(config.errors)
        self.assertEqual(config['mesh.boundary'], 'exact')
        config = run_is_valid({'run': {'experiment': 'converge'},
                               'mesh': {'boundary': 'periodic'}})
        self.assertEqual(config['mesh.boundary'], 'periodic')

    def test_convergence_rejects_absorbing_boundary(self):
        config = run_is_valid({'run': {'experiment': 'converge'}},
                              overrides={'mesh.boundary': 'abc'})
        error = config.errors['errors'][0]
        self.assertEqual(error['field'], 'mesh.boundary')
        self.assertEqual(error['code'],
                         FRIENDLY_NON_FIELD_ERRORS['conflict'])

    def test_simulation_keeps_absorbing_default(self):
        config = run_is_valid({})
        self.assertEqual(config['mesh.boundary'], 'abc')

    def test_exact_boundary_needs_reference(self):
        config = run_is_valid({'mesh': {'boundary': 'exact'}})
        self.assertEqual(config.errors['errors'][0]['field'],
                         'mesh.boundary')
        config = run_is_valid({'mesh': {'boundary': 'exact'},
                               'wave': {'initial': 'planewave'}})
        self.assertFalse(config.errors)

    def test_source_needs_frequency(self):
        config = run_is_valid({'source': {'location': '0.5, 0.5'}})
        self.assertEqual(config.errors['errors'][0]['field'],
                         'source.frequency')

    def test_source_weights(self):
        config = run_is_valid({'source': {'location': '0.5, 0.5',
                                          'frequency': '10',
                                          'weights': 'sigma:1'}})
        self.assertEqual(config.errors['errors'][0]['field'],
                         'source.weights')
        config = run_is_valid({'source': {'location': '0.5, 0.5',
                                          'frequency': '10',
                                          'weights': 'p:1, tau11:-1'}})
        self.assertEqual(config['source.weights'], {'p': 1.0, 'tau11': -1.0})

    def test_receivers(self):
        config = run_is_valid({'receivers': {'points': '0.1,0.2; 0.3,0.4'}})
        self.assertEqual(config['receivers.points'], [(0.1, 0.2), (0.3, 0.4)])
        config = run_is_valid({'receivers': {'points': '0.1,0.2,0.3'}})
        self.assertEqual(config.errors['errors'][0]['field'],
                         'receivers.points')


class ConfigFileTestCase(BaseTestCase):

    def setUp(self):
        super(ConfigFileTestCase, self).setUp()
        handle, self.path = tempfile.mkstemp(suffix='.ini')
        os.close(handle)

    def tearDown(self):
        os.remove(self.path)

    def write(self, text):
        with open(self.path, 'w', encoding='utf-8') as handle:
            handle.write(text)

    def test_from_file(self):
        self.write('[run]\nN = 2\nexperiment = spectra\n\n'
                   '[flux]\nalphas = 0, 1\n')
        config = load_config(self.path)
        self.assertEqual(config['run.N'], 2)
        self.assertEqual(config['run.experiment'], 'spectra')
        self.assertEqual(config['flux.alphas'], (0.0, 1.0))

    def test_overrides_win(self):
        self.write('[run]\nN = 2\n')
        config = load_config(self.path, overrides={'run.N': 4,
                                                   'time.cfl': None})
        self.assertEqual(config['run.N'], 4)
        self.assertEqual(config['time.cfl'], 1.0)

    def test_parse_error(self):
        self.write('N = 2\n')
        with self.assertRaises(ValidationError) as ctx:
            RunConfig.from_file(self.path)
        self.assertEqual(ctx.exception.errors[0]['code'],
                         FRIENDLY_NON_FIELD_ERRORS['invalid'])

    def test_missing_config_file(self):
        with self.assertRaises(ConfigurationError):
            RunConfig.from_file(self.path + '.missing')

    def test_load_config_raises(self):
        self.write('[run]\nN = 12\n')
        with self.assertRaises(ValidationError) as ctx:
            load_config(self.path)
        self.assertEqual(ctx.exception.code, VALIDATION_FAILED_CODE)
        self.assertEqual(ctx.exception.errors[0]['field'], 'run.N')

    def test_echo(self):
        self.write('[mesh]\nlevels = 2, 4, 8\n')
        echo = load_config(self.path).echo()
        self.assertEqual(echo['mesh']['levels'], [2, 4, 8])
