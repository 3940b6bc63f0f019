from . import settings


class PorowaveError(Exception):
    """Base error; ``code`` is looked up by class name in ERROR_CODES."""

    default_message = 'porowave error'

    def __init__(self, message=None, errors=None, **meta):
        self.message = message or self.default_message
        self.errors = list(errors or [])
        self.meta = meta
        super(PorowaveError, self).__init__(self.message)

    @property
    def code(self):
        for klass in type(self).__mro__:
            code = settings.ERROR_CODES.get(klass.__name__)
            if code is not None:
                return code
        return None

    def __getattr__(self, name):
        meta = self.__dict__.get('meta', {})
        if name in meta:
            return meta[name]
        raise AttributeError(name)


class ConfigurationError(PorowaveError):
    default_message = 'Invalid configuration'


class ValidationError(ConfigurationError):
    default_message = settings.VALIDATION_FAILED_MESSAGE

    @property
    def code(self):
        return settings.VALIDATION_FAILED_CODE


class ShapeError(PorowaveError):
    default_message = 'Array shape mismatch'


class MeshFormatError(PorowaveError):
    def __init__(self, message, lineno=None, path=None):
        if lineno is not None:
            message = 'line %d: %s' % (lineno, message)
        super(MeshFormatError, self).__init__(message, lineno=lineno,
                                              path=path)


class TopologyError(PorowaveError):
    def __init__(self, message, elements=()):
        super(TopologyError, self).__init__(message,
                                            elements=tuple(elements))


class InvertedElementError(PorowaveError):
    def __init__(self, element, jacobian):
        message = 'element %d is inverted or degenerate (J = %g)' % (
            element, jacobian)
        super(InvertedElementError, self).__init__(message, element=element,
                                                   jacobian=jacobian)


class SourceLocationError(PorowaveError):
    def __init__(self, point):
        message = 'point %s lies outside the mesh' % (tuple(point),)
        super(SourceLocationError, self).__init__(message,
                                                  point=tuple(point))


class MaterialError(PorowaveError):
    default_message = 'Non-physical material'


class UnknownPresetError(MaterialError):
    def __init__(self, name, available):
        message = 'unknown material preset "%s"; available: %s' % (
            name, ', '.join(sorted(available)))
        super(UnknownPresetError, self).__init__(
            message, name=name, available=tuple(sorted(available)))


class IndefiniteHessianError(MaterialError):
    default_message = 'Indefinite Hessian'


class FieldEvaluationError(PorowaveError):
    def __init__(self, point, reason):
        message = 'coefficient field failed at %s: %s' % (tuple(point),
                                                          reason)
        super(FieldEvaluationError, self).__init__(message,
                                                   point=tuple(point))


class EigenSolveError(PorowaveError):
    default_message = 'Eigendecomposition failed'


class ModeSelectionError(PorowaveError):
    default_message = 'Ambiguous plane-wave mode ordering'


class SolverDivergedError(PorowaveError):
    def __init__(self, element, time):
        message = 'non-finite values in element %d at t = %.6e' % (element,
                                                                    time)
        super(SolverDivergedError, self).__init__(message, element=element,
                                                  time=time)


class SizeGuardError(PorowaveError):
    def __init__(self, size, limit):
        message = 'dense operator of size %d exceeds the limit of %d' % (
            size, limit)
        super(SizeGuardError, self).__init__(message, size=size, limit=limit)


class ReferenceNormError(PorowaveError):
    default_message = 'Reference solution has zero norm'


class OutputError(PorowaveError):
    def __init__(self, path, reason):
        message = 'cannot write %s: %s' % (path, reason)
        super(OutputError, self).__init__(message, path=str(path))
