import os

from . import settings
from .exceptions import ValidationError
from .field_map import FieldMap
from .utils import parse_floats, parse_ints

TRUE_VALUES = ('1', 'true', 'yes', 'on')
FALSE_VALUES = ('0', 'false', 'no', 'off')


class FieldError(Exception):
    def __init__(self, key, **kwargs):
        self.key = key
        self.kwargs = kwargs
        super(FieldError, self).__init__(key)


class FriendlyErrorMessagesMixin(FieldMap):
    """
        A config mixin which collects every validation failure and reports
        it in the friendly ``{code, message, errors}`` format.

        Subclasses provide ``fields`` (``'section.key'`` -> schema entry)
        and ``initial_data`` (``section`` -> ``key`` -> raw value).
    """

    FIELD_VALIDATION_ERRORS = {}
    NON_FIELD_ERRORS = {}

    def __init__(self, *args, **kwargs):
        self.registered_errors = []
        self._validated_data = None
        super(FriendlyErrorMessagesMixin, self).__init__(*args, **kwargs)

    @property
    def errors(self):
        return self.build_pretty_errors(self.registered_errors)

    @property
    def validated_data(self):
        if self._validated_data is None:
            raise AssertionError('You must call `.is_valid()` before '
                                 'accessing `.validated_data`.')
        return self._validated_data

    def register_error(self, error_message, field_name=None,
                       error_key=None, error_code=None, meta=None,
                       raise_validation_error=True):
        if field_name is None:
            if error_code is None:
                error_code = self.NON_FIELD_ERRORS.get(
                    error_key, settings.FRIENDLY_NON_FIELD_ERRORS.get(
                        error_key))
            if error_code is None:
                raise ValueError('For non field error you must provide '
                                 'an error code')
            error = {'code': error_code, 'field': None,
                     'message': error_message}
        else:
            schema = self.fields.get(field_name)
            if schema is None:
                raise ValueError('Incorrect field name')
            kind = schema['kind']
            if error_key is None and error_code is None:
                raise ValueError('You have to provide either error key'
                                 ' or error code')
            if error_code is None:
                error_code = self.FIELD_VALIDATION_ERRORS.get(field_name)
            if error_code is None:
                try:
                    error_code = settings.FRIENDLY_CONFIG_ERRORS[kind].get(
                        error_key)
                except KeyError:
                    raise ValueError('Unknown field type: "%s"' % kind)
                if error_code is None:
                    raise ValueError('Unknown error key: "%s" '
                                     'for field type: "%s"' %
                                     (error_key, kind))
            error = {'code': error_code, 'field': field_name,
                     'message': error_message}

        if meta is not None:
            error['meta'] = meta
        self.registered_errors.append(error)

        if raise_validation_error:
            raise ValidationError(errors=self.errors['errors'])

    def get_field_kwargs(self, schema, field_data):
        kwargs = {
            'kind': schema['kind'],
            'data_type': type(field_data).__name__,
            'value': field_data,
        }
        category = self.category(schema['kind'])
        if category in ('numeric', 'sequence'):
            kwargs.update({'min_value': schema.get('min_value'),
                           'max_value': schema.get('max_value')})
        elif category == 'choice':
            kwargs.update({'choices': ', '.join(schema['choices'])})
        return kwargs

    def get_raw(self, field_name):
        section, _, key = field_name.partition('.')
        return self.initial_data.get(section, {}).get(key)

    def to_internal_value(self, schema, raw):
        """Convert one raw value; raises FieldError with a message key."""
        kind = schema['kind']
        if raw is None:
            raise FieldError('required')
        if isinstance(raw, str):
            raw = raw.strip()
        category = self.category(kind)
        if category == 'numeric':
            try:
                value = int(raw) if kind == 'int' else float(raw)
            except (TypeError, ValueError):
                raise FieldError('invalid')
            self._check_bounds(schema, [value])
            return value
        if category == 'sequence':
            if not isinstance(raw, str):
                raw = ', '.join(str(item) for item in raw)
            try:
                value = parse_ints(raw) if kind == 'ints' else \
                    parse_floats(raw)
            except ValueError:
                raise FieldError('invalid')
            self._check_bounds(schema, value)
            return value
        if category == 'boolean':
            if isinstance(raw, bool):
                return raw
            text = str(raw).lower()
            if text in TRUE_VALUES:
                return True
            if text in FALSE_VALUES:
                return False
            raise FieldError('invalid')
        if category == 'choice':
            if raw not in schema['choices']:
                raise FieldError('invalid_choice')
            return raw
        if category == 'file':
            if raw and not os.path.exists(raw):
                raise FieldError('does_not_exist')
            return raw
        if schema.get('allow_blank', True) is False and not raw:
            raise FieldError('blank')
        return raw

    def _check_bounds(self, schema, values):
        low = schema.get('min_value')
        high = schema.get('max_value')
        for value in values:
            if low is not None and value < low:
                raise FieldError('min_value')
            if high is not None and value > high:
                raise FieldError('max_value')

    def run_field_validation(self):
        data = {}
        for field_name, schema in self.fields.items():
            raw = self.get_raw(field_name)
            try:
                data[field_name] = self.to_internal_value(schema, raw)
            except FieldError as err:
                kwargs = self.get_field_kwargs(schema, raw)
                message = self.error_messages[err.key].format(**kwargs)
                self.register_error(message, field_name=field_name,
                                    error_key=err.key,
                                    raise_validation_error=False)
        return data

    def validate(self, data):
        return data

    def is_valid(self, raise_exception=False):
        self.registered_errors = []
        data = self.run_field_validation()
        if not self.registered_errors:
            data = self.validate(data)
        if self.registered_errors:
            self._validated_data = None
            if raise_exception:
                raise ValidationError(errors=self.errors['errors'])
            return False
        self._validated_data = data
        return True

    def build_pretty_errors(self, errors):
        pretty = [dict(error) for error in errors]
        if pretty:
            return {'code': settings.VALIDATION_FAILED_CODE,
                    'message': settings.VALIDATION_FAILED_MESSAGE,
                    'errors': pretty}
        return {}
