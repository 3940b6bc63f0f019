"""
Run configuration: INI-style files, dict input and command-line overrides,
validated through the friendly-errors mixin before anything is allocated.
"""
import configparser
import copy
import logging

from . import settings
from .exceptions import ConfigurationError, ValidationError
from .field_map import FIELD_INDEX
from .mixins import FriendlyErrorMessagesMixin
from .utils import parse_points, parse_weights

logger = logging.getLogger(__name__)


class RunConfig(FriendlyErrorMessagesMixin):
    """
        Sectioned run settings.  Values are read as ``config['N']`` for
        unambiguous keys or ``config.section('mesh')['k1d']``.
    """

    def __init__(self, data=None, overrides=None, source=None):
        super(RunConfig, self).__init__()
        self.source = source
        self.user_data = {section: dict(values)
                          for section, values in (data or {}).items()}
        for dotted, value in (overrides or {}).items():
            if value is None:
                continue
            section, _, key = dotted.partition('.')
            self.user_data.setdefault(section, {})[key] = value

        self.initial_data = copy.deepcopy(settings.RUN_DEFAULTS)
        for section, values in self.user_data.items():
            if section in self.initial_data:
                self.initial_data[section].update(values)

        self.fields = {
            '%s.%s' % (section, key): schema
            for section, keys in settings.RUN_SCHEMA.items()
            for key, schema in keys.items()
        }

    def __repr__(self):
        return '<RunConfig source=%r>' % (self.source,)

    @classmethod
    def from_dict(cls, data, overrides=None):
        return cls(data, overrides=overrides, source='<dict>')

    @classmethod
    def from_file(cls, path, overrides=None):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                parser.read_file(handle)
        except OSError as exc:
            raise ConfigurationError('cannot read config %s: %s'
                                     % (path, exc), path=str(path))
        except configparser.Error as exc:
            raise ValidationError(errors=[{
                'code': settings.FRIENDLY_NON_FIELD_ERRORS['invalid'],
                'field': None,
                'message': str(exc).strip()}], path=str(path))
        data = {section: dict(parser.items(section))
                for section in parser.sections()}
        return cls(data, overrides=overrides, source=str(path))

    def was_set(self, section, key):
        return key in self.user_data.get(section, {})

    def run_field_validation(self):
        for section, values in self.user_data.items():
            if section not in settings.RUN_SCHEMA:
                self.register_error('Unknown section "[%s]".' % section,
                                    error_key='unknown_section',
                                    raise_validation_error=False)
                continue
            for key in values:
                if key not in settings.RUN_SCHEMA[section]:
                    self.register_error(
                        'Unknown key "%s" in section "[%s]".'
                        % (key, section), error_key='unknown_key',
                        raise_validation_error=False)
        return super(RunConfig, self).run_field_validation()

    def _conflict(self, message, field_name=None):
        if field_name is None:
            self.register_error(message, error_key='conflict',
                                raise_validation_error=False)
        else:
            self.register_error(
                message, field_name=field_name,
                error_code=settings.FRIENDLY_NON_FIELD_ERRORS['conflict'],
                raise_validation_error=False)

    def _sized(self, data, section, key, dim, fill=None):
        values = data['%s.%s' % (section, key)]
        if len(values) == dim:
            return values
        if len(values) == 1:
            return values * dim
        if not self.was_set(section, key) and values:
            return (values[0] if fill is None else fill,) * dim
        self._conflict('Expected %d values for a %dD run, got %d.'
                       % (dim, dim, len(values)), '%s.%s' % (section, key))
        return values

    def validate(self, data):
        dim = data['run.dim']
        if data['run.mode'] == 'compact2d' and dim != 2:
            self._conflict('Run mode "compact2d" requires dim = 2.',
                           'run.mode')
        data['mesh.extent'] = self._sized(data, 'mesh', 'extent', dim)
        data['mesh.origin'] = self._sized(data, 'mesh', 'origin', dim, 0.0)
        if data['mesh.extent'] and min(data['mesh.extent']) <= 0.0:
            self._conflict('Mesh extents must be positive.', 'mesh.extent')
        if data['mesh.file'] and self.was_set('mesh', 'k1d'):
            self._conflict('Give either a mesh file or k1d, not both.')

        if data['run.experiment'] == 'converge':
            if len(data['mesh.levels']) < 3:
                self._conflict('A convergence study needs at least 3 mesh '
                               'levels.', 'mesh.levels')
            if list(data['mesh.levels']) != sorted(data['mesh.levels']):
                self._conflict('Mesh levels must increase.', 'mesh.levels')
            if not self.was_set('mesh', 'boundary'):
                data['mesh.boundary'] = 'exact'
            elif data['mesh.boundary'] not in ('exact', 'periodic'):
                self._conflict('A convergence study needs exact or periodic '
                               'boundaries.', 'mesh.boundary')
        if data['mesh.boundary'] == 'exact' and \
                data['run.experiment'] == 'simulate' and \
                data['wave.initial'] != 'planewave':
            self._conflict('Exact boundary traces need the plane-wave '
                           'reference (wave.initial = planewave).',
                           'mesh.boundary')
        if data['run.experiment'] == 'heterogeneity' and \
                data['material.modulation'] == 'none':
            self._conflict('The heterogeneity comparison needs a modulated '
                           'material.', 'material.modulation')
        data['wave.wavenumber'] = self._sized(data, 'wave', 'wavenumber',
                                              dim)

        location = data['source.location']
        if location:
            if len(location) != dim:
                self._conflict('Source location needs %d coordinates.' % dim,
                               'source.location')
            if data['source.frequency'] <= 0.0:
                self._conflict('A point source needs a positive Ricker '
                               'frequency.', 'source.frequency')
            try:
                weights = parse_weights(data['source.weights'])
            except ValueError:
                weights = None
            if not weights or set(weights) - set(FIELD_INDEX):
                self._conflict('Source weights must be "field:value" pairs '
                               'over state fields.', 'source.weights')
            else:
                data['source.weights'] = weights

        try:
            points = parse_points(data['receivers.points'])
        except ValueError:
            points = None
        if points is None or any(len(p) != dim for p in points):
            self._conflict('Receiver points must be "x,y; x,y" with %d '
                           'coordinates each.' % dim, 'receivers.points')
        else:
            data['receivers.points'] = points

        sections = {}
        for dotted, value in data.items():
            section, _, key = dotted.partition('.')
            sections.setdefault(section, {})[key] = value
        return sections

    def section(self, name):
        return self.validated_data[name]

    def __getitem__(self, key):
        if '.' in key:
            section, _, key = key.partition('.')
            return self.validated_data[section][key]
        hits = [values[key] for values in self.validated_data.values()
                if key in values]
        if len(hits) != 1:
            raise KeyError(key)
        return hits[0]

    def echo(self):
        """Validated settings as plain JSON-friendly values."""
        out = {}
        for section, values in self.validated_data.items():
            out[section] = {key: list(value) if isinstance(value, tuple)
                            else value for key, value in values.items()}
        return out


def load_config(path=None, data=None, overrides=None):
    """Build and validate a RunConfig; raises ValidationError on failure."""
    if path:
        config = RunConfig.from_file(path, overrides=overrides)
    else:
        config = RunConfig.from_dict(data or {}, overrides=overrides)
    config.is_valid(raise_exception=True)
    logger.debug('validated run config from %s', config.source)
    return config
