"""
Affine simplicial meshes: geometry, face connectivity and boundary tags.
"""
import itertools
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Tuple

import numpy as np

from .exceptions import (ConfigurationError, InvertedElementError,
                         MeshFormatError, OutputError, SourceLocationError,
                         TopologyError)
from .refelem import FACES, MEASURE

logger = logging.getLogger(__name__)

SIDES = ('xmin', 'xmax', 'ymin', 'ymax', 'zmin', 'zmax')
MATCH_TOLERANCE = 1e-10
LOCATE_TOLERANCE = 1e-10


class BoundaryTag(IntEnum):
    INTERIOR = 0
    FREE = 1
    ABSORBING = 2
    EXACT = 3
    PERIODIC = 4

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return FILE_TAGS[str(value).strip().lower()]
        except KeyError:
            raise ConfigurationError('unknown boundary tag "%s"' % (value,))


FILE_TAGS = {
    'free': BoundaryTag.FREE,
    'abc': BoundaryTag.ABSORBING,
    'exact': BoundaryTag.EXACT,
}
TAG_NAMES = {tag: name for name, tag in FILE_TAGS.items()}


class Mesh(object):
    """Affine simplicial mesh with per-element geometric factors.

    ``rx[k, b, a]`` holds dr_b/dx_a, ``normals[k, f]`` the outward unit
    normal and ``Jf[k, f]`` the face Jacobian relative to the bi-unit
    reference face.  Connectivity is filled in by :func:`connect_faces`.
    """

    def __init__(self, vertices, elements, h=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.elements = np.asarray(elements, dtype=int)
        self.dim = self.vertices.shape[1]
        if self.dim not in (2, 3):
            raise ConfigurationError('unsupported dimension %d' % self.dim)
        if self.elements.ndim != 2 or \
                self.elements.shape[1] != self.dim + 1:
            raise ConfigurationError('elements need %d vertices each'
                                     % (self.dim + 1))
        self.K = len(self.elements)
        self.faces = FACES[self.dim]
        self.nfaces = self.dim + 1
        self._compute_geometry()
        self.h = float(h) if h is not None else self.max_edge_length()

        self.neighbor = np.full((self.K, self.nfaces), -1, dtype=int)
        self.neighbor_face = np.full((self.K, self.nfaces), -1, dtype=int)
        self.tags = np.full((self.K, self.nfaces), BoundaryTag.INTERIOR,
                            dtype=int)
        self.connected = False
        self._trace_permutations = {}

    def __repr__(self):
        return '<Mesh dim=%d K=%d h=%g>' % (self.dim, self.K, self.h)

    def _compute_geometry(self):
        X = self.vertices[self.elements]
        self.element_vertices = X
        self.G = np.transpose(X[:, 1:, :] - X[:, :1, :], (0, 2, 1)) / 2.0
        self.J = np.linalg.det(self.G)
        bad = np.flatnonzero(self.J <= 0.0)
        if len(bad):
            raise InvertedElementError(int(bad[0]), float(self.J[bad[0]]))
        self.rx = np.linalg.inv(self.G)

        grad_ref = np.zeros((self.dim + 1, self.dim))
        grad_ref[0, :] = -0.5
        grad_ref[1:, :] = 0.5 * np.eye(self.dim)
        normals = np.empty((self.K, self.nfaces, self.dim))
        for f, verts in enumerate(self.faces):
            opposite = (set(range(self.dim + 1)) - set(verts)).pop()
            grad = np.einsum('kba,b->ka', self.rx, grad_ref[opposite])
            normals[:, f] = -grad / np.linalg.norm(grad, axis=1)[:, None]
        self.normals = normals

        Jf = np.empty((self.K, self.nfaces))
        centroids = np.empty((self.K, self.nfaces, self.dim))
        for f, verts in enumerate(self.faces):
            P = X[:, list(verts), :]
            centroids[:, f] = P.mean(axis=1)
            if self.dim == 2:
                Jf[:, f] = np.linalg.norm(P[:, 1] - P[:, 0], axis=1) / 2.0
            else:
                area = 0.5 * np.linalg.norm(
                    np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]), axis=1)
                Jf[:, f] = area / 2.0
        self.Jf = Jf
        self.face_centroids = centroids

    def max_edge_length(self):
        X = self.element_vertices
        lengths = [np.linalg.norm(X[:, i] - X[:, j], axis=1)
                   for i, j in itertools.combinations(range(self.dim + 1), 2)]
        return float(np.max(lengths))

    @property
    def measure(self):
        return float(np.sum(self.J) * MEASURE[self.dim])

    def map_points(self, ref_points):
        """Physical coordinates of reference points, shape (K, npts, dim)."""
        ref_points = np.atleast_2d(ref_points)
        X0 = self.element_vertices[:, 0, :]
        return X0[:, None, :] + np.einsum('kab,pb->kpa', self.G,
                                          ref_points + 1.0)

    def face_vertex_ids(self, k, f):
        return tuple(int(v) for v in self.elements[k][list(self.faces[f])])

    def boundary_faces(self, tag=None):
        mask = self.neighbor < 0
        if tag is not None:
            mask &= self.tags == int(tag)
        return np.argwhere(mask)

    def trace_permutation(self, ref):
        key = (ref.dim, ref.N)
        if key not in self._trace_permutations:
            self._trace_permutations[key] = match_face_traces(self, ref)
        return self._trace_permutations[key]

    def locate(self, points):
        """Containing element and reference coordinates for each point."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dim:
            raise SourceLocationError(points[0])
        X0 = self.element_vertices[:, 0, :]
        r = np.einsum('kba,kpa->kpb', self.rx,
                      points[None, :, :] - X0[:, None, :]) - 1.0
        lam = (r + 1.0) / 2.0
        bary_min = np.minimum(1.0 - lam.sum(axis=2), lam.min(axis=2))
        inside = bary_min >= -LOCATE_TOLERANCE
        elements = np.empty(len(points), dtype=int)
        ref = np.empty_like(points)
        for p in range(len(points)):
            hits = np.flatnonzero(inside[:, p])
            if not len(hits):
                raise SourceLocationError(points[p])
            elements[p] = hits[0]
            ref[p] = r[hits[0], p]
        return elements, ref


@dataclass
class UniformGridSpec:
    dim: int
    k1d: int
    extents: Tuple[float, ...] = None
    origin: Tuple[float, ...] = None
    boundary: Any = BoundaryTag.ABSORBING
    periodic: Any = False
    side_tags: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigurationError('unsupported dimension %r' % (self.dim,))
        if int(self.k1d) != self.k1d or self.k1d < 1:
            raise ConfigurationError('k1d must be a positive integer')
        self.k1d = int(self.k1d)
        if self.extents is None:
            self.extents = (1.0,) * self.dim
        if self.origin is None:
            self.origin = (0.0,) * self.dim
        self.extents = tuple(float(e) for e in self.extents)
        self.origin = tuple(float(o) for o in self.origin)
        if len(self.extents) != self.dim or len(self.origin) != self.dim:
            raise ConfigurationError('extents and origin need %d entries'
                                     % self.dim)
        if min(self.extents) <= 0.0:
            raise ConfigurationError('box extents must be positive')
        if isinstance(self.periodic, bool):
            self.periodic = (self.periodic,) * self.dim
        self.periodic = tuple(bool(p) for p in self.periodic)
        if len(self.periodic) != self.dim:
            raise ConfigurationError('periodic needs %d entries' % self.dim)

        sides = SIDES[:2 * self.dim]
        if isinstance(self.boundary, dict):
            unknown = set(self.boundary) - set(sides)
            if unknown:
                raise ConfigurationError('unknown sides: %s'
                                         % ', '.join(sorted(unknown)))
            default = BoundaryTag.ABSORBING
            self.side_tags = {side: BoundaryTag.parse(
                self.boundary.get(side, default)) for side in sides}
        else:
            tag = BoundaryTag.parse(self.boundary)
            self.side_tags = {side: tag for side in sides}

    @property
    def h(self):
        return max(self.extents) / self.k1d


def _lattice_vertices(spec):
    n = spec.k1d + 1
    idx = np.array(list(itertools.product(range(n), repeat=spec.dim)))
    coords = (np.asarray(spec.origin)
              + np.asarray(spec.extents) * idx / float(spec.k1d))
    return idx, coords


def _kuhn_paths(dim):
    paths = []
    for perm in itertools.permutations(range(dim)):
        offset = np.zeros(dim, dtype=int)
        path = [offset.copy()]
        for axis in perm:
            offset[axis] += 1
            path.append(offset.copy())
        paths.append(path)
    return paths


def build_uniform(spec):
    """Structured simplicial mesh of a box.

    Squares are bisected along the (0,0)-(1,1) diagonal; cubes use the
    six-tetrahedron Kuhn split.
    """
    idx, coords = _lattice_vertices(spec)
    n = spec.k1d + 1
    strides = n ** np.arange(spec.dim)[::-1]

    def vid(lattice):
        return int(np.dot(lattice, strides))

    elements = []
    for base in itertools.product(range(spec.k1d), repeat=spec.dim):
        base = np.array(base)
        if spec.dim == 2:
            v00 = vid(base)
            v10 = vid(base + (1, 0))
            v11 = vid(base + (1, 1))
            v01 = vid(base + (0, 1))
            elements.append((v00, v10, v11))
            elements.append((v00, v11, v01))
            continue
        for path in _kuhn_paths(3):
            verts = [vid(base + p) for p in path]
            P = coords[verts]
            if np.linalg.det((P[1:] - P[0]).T) < 0:
                verts[2], verts[3] = verts[3], verts[2]
            elements.append(tuple(verts))

    mesh = Mesh(coords, elements, h=spec.h)
    lattice = idx[mesh.elements]

    keys = {}
    for k in range(mesh.K):
        for f, verts in enumerate(mesh.faces):
            pts = lattice[k, list(verts)]
            base = pts.min(axis=0)
            offsets = frozenset(tuple(p - base) for p in pts)
            base = tuple(int(b) % spec.k1d if spec.periodic[a] else int(b)
                         for a, b in enumerate(base))
            keys[(k, f)] = (base, offsets)

    def tagger(k, f):
        pts = lattice[k, list(mesh.faces[f])]
        for axis in range(spec.dim):
            if np.all(pts[:, axis] == 0):
                return spec.side_tags[SIDES[2 * axis]]
            if np.all(pts[:, axis] == spec.k1d):
                return spec.side_tags[SIDES[2 * axis + 1]]
        raise TopologyError('unmatched interior face', elements=(k,))

    connect_faces(mesh, face_keys=keys, tagger=tagger)
    logger.debug('uniform mesh dim=%d k1d=%d K=%d', spec.dim, spec.k1d,
                 mesh.K)
    return mesh


def connect_faces(mesh, face_keys=None, boundary=None, tagger=None,
                  default_tag=BoundaryTag.ABSORBING):
    """Pair faces that share a key and tag the rest as boundary.

    Keys default to the set of face vertex ids.  Paired faces whose
    centroids differ are periodic images of one another.
    """
    groups = {}
    for k in range(mesh.K):
        for f in range(mesh.nfaces):
            if face_keys is not None:
                key = face_keys[(k, f)]
            else:
                key = frozenset(mesh.face_vertex_ids(k, f))
            groups.setdefault(key, []).append((k, f))

    boundary = boundary or {}
    tol = MATCH_TOLERANCE * mesh.h
    for key, members in groups.items():
        if len(members) > 2:
            raise TopologyError(
                'face shared by %d elements' % len(members),
                elements=sorted(set(k for k, _ in members)))
        if len(members) == 1:
            k, f = members[0]
            if key in boundary:
                tag = BoundaryTag.parse(boundary[key])
            elif tagger is not None:
                tag = BoundaryTag.parse(tagger(k, f))
            else:
                tag = BoundaryTag.parse(default_tag)
            mesh.neighbor[k, f] = -1
            mesh.neighbor_face[k, f] = -1
            mesh.tags[k, f] = tag
            continue
        (k1, f1), (k2, f2) = members
        if not np.allclose(mesh.normals[k1, f1], -mesh.normals[k2, f2],
                           rtol=0.0, atol=1e-12):
            raise TopologyError('shared face normals do not oppose',
                                elements=(k1, k2))
        gap = np.linalg.norm(mesh.face_centroids[k1, f1]
                             - mesh.face_centroids[k2, f2])
        tag = BoundaryTag.PERIODIC if gap > tol else BoundaryTag.INTERIOR
        mesh.neighbor[k1, f1], mesh.neighbor_face[k1, f1] = k2, f2
        mesh.neighbor[k2, f2], mesh.neighbor_face[k2, f2] = k1, f1
        mesh.tags[k1, f1] = mesh.tags[k2, f2] = tag

    mesh.connected = True
    mesh._trace_permutations = {}
    return mesh


def match_face_traces(mesh, ref):
    """Permutation of the neighbour's face quadrature points, per face.

    ``perm[k, f, q]`` is the neighbour's point coincident with point q of
    face f of element k, matched relative to the face centroids.
    """
    nfq = ref.Nfq
    perm = np.tile(np.arange(nfq), (mesh.K, mesh.nfaces, 1))
    pts = np.stack([mesh.map_points(ref.face_points[f])
                    for f in range(mesh.nfaces)], axis=1)
    rel = pts - mesh.face_centroids[:, :, None, :]
    pairs = np.argwhere(mesh.neighbor >= 0)
    if not len(pairs):
        return perm
    k, f = pairs.T
    nk = mesh.neighbor[k, f]
    nf = mesh.neighbor_face[k, f]
    mine = rel[k, f]
    theirs = rel[nk, nf]
    dist = np.linalg.norm(mine[:, :, None, :] - theirs[:, None, :, :],
                          axis=3)
    best = np.argmin(dist, axis=2)
    worst = np.take_along_axis(dist, best[:, :, None], axis=2).max(axis=(1, 2))
    bad = np.flatnonzero(worst > MATCH_TOLERANCE * mesh.h)
    if len(bad):
        i = bad[0]
        raise TopologyError('face traces do not coincide',
                            elements=(int(k[i]), int(nk[i])))
    perm[k, f] = best
    return perm


def load_mesh(path, default_tag=BoundaryTag.ABSORBING):
    """Read a mesh in the neutral text format.

    Header ``dim nV nK``, then vertex lines, element lines (0-based ids)
    and an optional ``boundary`` section of ``ids... tag`` lines.
    """
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            raw_lines = handle.readlines()
    except OSError as exc:
        raise MeshFormatError(str(exc), path=str(path))

    lines = []
    for lineno, line in enumerate(raw_lines, start=1):
        text = line.split('#', 1)[0].strip()
        if text:
            lines.append((lineno, text.split()))
    if not lines:
        raise MeshFormatError('empty mesh file', path=str(path))

    lineno, header = lines[0]
    try:
        dim, nv, nk = (int(token) for token in header)
    except ValueError:
        raise MeshFormatError('header must be "dim nV nK"', lineno,
                              str(path))
    if dim not in (2, 3):
        raise MeshFormatError('unsupported dimension %d' % dim, lineno,
                              str(path))
    if len(lines) < 1 + nv + nk:
        raise MeshFormatError('expected %d vertex and %d element lines'
                              % (nv, nk), lines[-1][0], str(path))

    vertices = np.empty((nv, dim))
    for i in range(nv):
        lineno, tokens = lines[1 + i]
        if len(tokens) != dim:
            raise MeshFormatError('vertex needs %d coordinates' % dim,
                                  lineno, str(path))
        try:
            vertices[i] = [float(t) for t in tokens]
        except ValueError:
            raise MeshFormatError('invalid coordinate', lineno, str(path))

    elements = np.empty((nk, dim + 1), dtype=int)
    for i in range(nk):
        lineno, tokens = lines[1 + nv + i]
        ids = _parse_ids(tokens, dim + 1, nv, lineno, path)
        elements[i] = ids

    boundary = {}
    rest = lines[1 + nv + nk:]
    if rest:
        lineno, tokens = rest[0]
        if tokens != ['boundary']:
            raise MeshFormatError('expected "boundary" section', lineno,
                                  str(path))
        for lineno, tokens in rest[1:]:
            ids = _parse_ids(tokens[:-1], dim, nv, lineno, path)
            tag = FILE_TAGS.get(tokens[-1].lower())
            if tag is None:
                raise MeshFormatError('unknown tag "%s"' % tokens[-1],
                                      lineno, str(path))
            boundary[frozenset(ids)] = (tag, lineno)

    mesh = Mesh(vertices, elements)
    known = {frozenset(mesh.face_vertex_ids(k, f))
             for k in range(mesh.K) for f in range(mesh.nfaces)}
    for key, (_, lineno) in boundary.items():
        if key not in known:
            raise MeshFormatError('boundary entry is not a mesh face',
                                  lineno, str(path))
    connect_faces(mesh, boundary={key: tag for key, (tag, _)
                                  in boundary.items()},
                  default_tag=default_tag)
    for key in boundary:
        members = [(k, f) for k, f in mesh.boundary_faces()
                   if frozenset(mesh.face_vertex_ids(k, f)) == key]
        if not members:
            raise MeshFormatError('boundary entry is an interior face',
                                  boundary[key][1], str(path))
    logger.info('loaded mesh %s: dim=%d K=%d', path, dim, mesh.K)
    return mesh


def _parse_ids(tokens, count, nv, lineno, path):
    if len(tokens) != count:
        raise MeshFormatError('expected %d vertex ids' % count, lineno,
                              str(path))
    try:
        ids = [int(t) for t in tokens]
    except ValueError:
        raise MeshFormatError('invalid vertex id', lineno, str(path))
    if min(ids) < 0 or max(ids) >= nv:
        raise MeshFormatError('vertex id out of range', lineno, str(path))
    return ids


def write_mesh(mesh, path):
    lines = ['%d %d %d' % (mesh.dim, len(mesh.vertices), mesh.K)]
    lines.extend(' '.join(repr(float(x)) for x in v) for v in mesh.vertices)
    lines.extend(' '.join(str(int(i)) for i in e) for e in mesh.elements)
    entries = []
    for k, f in mesh.boundary_faces():
        tag = BoundaryTag(mesh.tags[k, f])
        entries.append('%s %s' % (' '.join(str(i) for i in
                                           mesh.face_vertex_ids(k, f)),
                                  TAG_NAMES[tag]))
    skipped = int(np.sum(mesh.tags == BoundaryTag.PERIODIC)) // 2
    if skipped:
        logger.warning('%d periodic face pairs cannot be written and are '
                       'left out of %s', skipped, path)
    if entries:
        lines.append('boundary')
        lines.extend(entries)
    try:
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write('\n'.join(lines) + '\n')
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc))
