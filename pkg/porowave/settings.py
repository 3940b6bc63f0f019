import json
import os

from .utils import update_section_settings


def _load_user_settings(path):
    if not path:
        return {}
    with open(path, 'r', encoding='utf-8') as handle:
        return json.load(handle)


USER_SETTINGS = _load_user_settings(os.environ.get('POROWAVE_SETTINGS'))

USER_RUN_DEFAULTS = USER_SETTINGS.get('RUN_DEFAULTS', {})
USER_CONFIG_ERRORS = USER_SETTINGS.get('CONFIG_ERRORS', {})
USER_NON_FIELD_ERRORS = USER_SETTINGS.get('NON_FIELD_ERRORS', {})
USER_ERROR_CODES = USER_SETTINGS.get('ERROR_CODES', {})

VALIDATION_FAILED_CODE = USER_SETTINGS.get('VALIDATION_FAILED_CODE', 1000)
VALIDATION_FAILED_MESSAGE = USER_SETTINGS.get('VALIDATION_FAILED_MESSAGE',
                                              'Validation Failed')

CATCH_ALL_EXCEPTIONS = USER_SETTINGS.get('CATCH_ALL_EXCEPTIONS', False)

# Dense operator assembly and eigensolves refuse anything larger.
MAX_DENSE_DOFS = USER_SETTINGS.get('MAX_DENSE_DOFS', 5000)

LOG_FORMAT = USER_SETTINGS.get(
    'LOG_FORMAT', '%(asctime)s %(levelname)s %(name)s: %(message)s')

EXPERIMENTS = ('simulate', 'converge', 'spectra', 'dispersion', 'materials',
               'heterogeneity')

RUN_DEFAULTS = {
    'run': {'experiment': 'simulate', 'dim': 2, 'N': 3, 'mode': 'compact2d',
            'plane': 'xy', 'seed': 0, 'units': 'si', 'jobs': 1},
    'mesh': {'file': '', 'k1d': 8, 'extent': '1.0, 1.0', 'origin': '0.0, 0.0',
             'boundary': 'abc', 'levels': '2, 4, 8, 16'},
    'material': {'preset': 'sandstone_isotropic', 'file': '',
                 'inviscid': False, 'modulation': 'none',
                 'modulation_amplitude': 0.5,
                 'modulation_mode': 'pointwise'},
    'time': {'final_time': 1.0, 'cfl': 1.0, 'scheme': 'unified', 'dt': 0.0,
             'progress_every': 100},
    'flux': {'alpha_tau': 1.0, 'alpha_v': 1.0, 'alphas': '0, 0.5, 1'},
    'wave': {'wavenumber': '1, 1', 'initial': 'none'},
    'source': {'location': '', 'frequency': 0.0, 'delay': 0.0,
               'weights': 'p:1'},
    'receivers': {'points': '', 'stride': 1},
    'output': {'directory': 'porowave-out', 'snapshot_every': 0,
               'fields': 'b1, b2, p', 'energy': True},
    'dispersion': {'angles': 19, 'frequency': 100.0},
}

RUN_DEFAULTS = update_section_settings(RUN_DEFAULTS, USER_RUN_DEFAULTS)

# kind, choices or bounds per key; anything not listed is rejected.
RUN_SCHEMA = {
    'run': {
        'experiment': {'kind': 'choice', 'choices': EXPERIMENTS},
        'dim': {'kind': 'int', 'min_value': 2, 'max_value': 3},
        'N': {'kind': 'int', 'min_value': 1, 'max_value': 8},
        'mode': {'kind': 'choice', 'choices': ('full13', 'compact2d')},
        'plane': {'kind': 'choice', 'choices': ('xy', 'xz')},
        'seed': {'kind': 'int', 'min_value': 0},
        'units': {'kind': 'choice', 'choices': ('si', 'scaled')},
        'jobs': {'kind': 'int', 'min_value': 1},
    },
    'mesh': {
        'file': {'kind': 'path'},
        'k1d': {'kind': 'int', 'min_value': 1},
        'extent': {'kind': 'floats', 'min_value': 0.0},
        'origin': {'kind': 'floats'},
        'boundary': {'kind': 'choice',
                     'choices': ('free', 'abc', 'exact', 'periodic')},
        'levels': {'kind': 'ints', 'min_value': 1},
    },
    'material': {
        'preset': {'kind': 'str'},
        'file': {'kind': 'path'},
        'inviscid': {'kind': 'bool'},
        'modulation': {'kind': 'choice', 'choices': ('none', 'sine')},
        'modulation_amplitude': {'kind': 'float', 'min_value': 0.0,
                                 'max_value': 0.99},
        'modulation_mode': {'kind': 'choice',
                            'choices': ('pointwise', 'element_average')},
    },
    'time': {
        'final_time': {'kind': 'float', 'min_value': 0.0},
        'cfl': {'kind': 'float', 'min_value': 1e-12},
        'scheme': {'kind': 'choice', 'choices': ('unified', 'strang')},
        'dt': {'kind': 'float', 'min_value': 0.0},
        'progress_every': {'kind': 'int', 'min_value': 1},
    },
    'flux': {
        'alpha_tau': {'kind': 'float', 'min_value': 0.0},
        'alpha_v': {'kind': 'float', 'min_value': 0.0},
        'alphas': {'kind': 'floats', 'min_value': 0.0},
    },
    'wave': {
        'wavenumber': {'kind': 'floats'},
        'initial': {'kind': 'choice', 'choices': ('none', 'planewave')},
    },
    'source': {
        'location': {'kind': 'floats'},
        'frequency': {'kind': 'float', 'min_value': 0.0},
        'delay': {'kind': 'float'},
        'weights': {'kind': 'str'},
    },
    'receivers': {
        'points': {'kind': 'str'},
        'stride': {'kind': 'int', 'min_value': 1},
    },
    'output': {
        'directory': {'kind': 'str'},
        'snapshot_every': {'kind': 'int', 'min_value': 0},
        'fields': {'kind': 'str'},
        'energy': {'kind': 'bool'},
    },
    'dispersion': {
        'angles': {'kind': 'int', 'min_value': 1},
        'frequency': {'kind': 'float', 'min_value': 1e-12},
    },
}

FRIENDLY_CONFIG_ERRORS = {
    'int': {'required': 2001, 'invalid': 2011, 'min_value': 2071,
            'max_value': 2061},
    'float': {'required': 2002, 'invalid': 2012, 'min_value': 2072,
              'max_value': 2062},
    'floats': {'required': 2003, 'invalid': 2013, 'min_value': 2073},
    'ints': {'required': 2003, 'invalid': 2013, 'min_value': 2073},
    'bool': {'required': 2004, 'invalid': 2014},
    'choice': {'required': 2005, 'invalid_choice': 2081},
    'str': {'required': 2006, 'blank': 2031},
    'path': {'required': 2007, 'does_not_exist': 2151},
}

FRIENDLY_CONFIG_ERRORS = update_section_settings(FRIENDLY_CONFIG_ERRORS,
                                                 USER_CONFIG_ERRORS)

FRIENDLY_NON_FIELD_ERRORS = {
    'invalid': 1001,
    'unknown_section': 1002,
    'unknown_key': 1003,
    'conflict': 1004,
}

FRIENDLY_NON_FIELD_ERRORS.update(USER_NON_FIELD_ERRORS)

ERROR_CODES = {
    'PorowaveError': 4000,
    'ConfigurationError': 4001,
    'ValidationError': 4002,
    'ShapeError': 4003,
    'MeshFormatError': 4101,
    'TopologyError': 4102,
    'InvertedElementError': 4103,
    'SourceLocationError': 4104,
    'MaterialError': 4201,
    'UnknownPresetError': 4202,
    'IndefiniteHessianError': 4203,
    'FieldEvaluationError': 4204,
    'EigenSolveError': 4301,
    'ModeSelectionError': 4302,
    'SolverDivergedError': 4401,
    'SizeGuardError': 4402,
    'ReferenceNormError': 4403,
    'OutputError': 4501,
}
ERROR_CODES.update(USER_ERROR_CODES)
