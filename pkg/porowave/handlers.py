from . import settings
from .exceptions import PorowaveError
from .utils import is_pretty


def friendly_exception_handler(exc, context=None):
    """Turn an exception into a ``{code, message, errors}`` payload.

    Returns None for foreign exceptions unless CATCH_ALL_EXCEPTIONS is set.
    """
    if is_pretty(getattr(exc, 'payload', None)):
        return exc.payload

    if not isinstance(exc, PorowaveError):
        if not settings.CATCH_ALL_EXCEPTIONS:
            return None
        exc = PorowaveError(str(exc) or exc.__class__.__name__)

    errors = []
    for error in exc.errors:
        if isinstance(error, dict):
            errors.append({'field': error.get('field'),
                           'code': error.get('code'),
                           'message': error.get('message')})
        else:
            errors.append({'field': None, 'code': None,
                           'message': str(error)})

    payload = {'code': exc.code, 'message': exc.message, 'errors': errors}
    meta = {key: value for key, value in exc.meta.items()
            if value is not None}
    if meta:
        payload['meta'] = meta
    if context:
        payload['context'] = context
    return payload
