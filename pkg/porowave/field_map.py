import numpy as np

from .exceptions import ConfigurationError

STATE_FIELDS = ('tau11', 'tau22', 'tau33', 'tau23', 'tau13', 'tau12', 'p',
                'v1', 'v2', 'v3', 'q1', 'q2', 'q3')
FIELD_INDEX = {name: i for i, name in enumerate(STATE_FIELDS)}
NSTRESS = 7

# Out-of-plane fields dropped by the compact 2D mode.
PLANE_DROPPED = {
    'xy': ('tau23', 'tau13', 'v3', 'q3'),
    'xz': ('tau23', 'tau12', 'v2', 'q2'),
}
# Physical axes spanned by the two mesh coordinates.
PLANE_AXES = {'xy': (0, 1), 'xz': (0, 2)}

DERIVED_FIELDS = ('b1', 'b2', 'b3')


def active_fields(mode, plane='xy', dim=2):
    """Indices of the evolved state fields for a run mode."""
    if mode == 'full13':
        return tuple(range(len(STATE_FIELDS)))
    if mode != 'compact2d':
        raise ConfigurationError('unknown run mode "%s"' % mode)
    if dim != 2:
        raise ConfigurationError('compact2d requires a 2D mesh')
    if plane not in PLANE_DROPPED:
        raise ConfigurationError('unknown plane "%s"' % plane)
    dropped = PLANE_DROPPED[plane]
    return tuple(i for i, name in enumerate(STATE_FIELDS)
                 if name not in dropped)


def mesh_axes(dim, plane='xy'):
    """Physical axes carried by the mesh coordinates."""
    if dim == 3:
        return (0, 1, 2)
    return PLANE_AXES[plane]


def embed_points(points, plane='xy'):
    """Lift mesh coordinates to 3D physical points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] == 3:
        return points
    out = np.zeros((points.shape[0], 3))
    out[:, list(PLANE_AXES[plane])] = points
    return out


class FieldMap(object):
    """Groups run-config value kinds the way validation treats them."""

    @property
    def field_map(self):
        return {
            'numeric': ['int', 'float'],
            'sequence': ['floats', 'ints'],
            'boolean': ['bool'],
            'choice': ['choice'],
            'string': ['str'],
            'file': ['path'],
        }

    @property
    def error_messages(self):
        return {
            'required': 'This field is required.',
            'invalid': 'A valid {kind} is required.',
            'min_value': 'Ensure this value is greater than or equal to '
                         '{min_value}.',
            'max_value': 'Ensure this value is less than or equal to '
                         '{max_value}.',
            'invalid_choice': '"{value}" is not a valid choice.',
            'blank': 'This field may not be blank.',
            'does_not_exist': 'File "{value}" does not exist.',
        }

    def category(self, kind):
        for name, kinds in self.field_map.items():
            if kind in kinds:
                return name
        return None
