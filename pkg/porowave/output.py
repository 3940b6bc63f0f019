"""
Result files: VTK snapshots, receiver and energy CSVs, the run manifest.
"""
import csv
import json
import logging
import os
import platform
import time

import numpy as np
import scipy
import vtk

from . import VERSION
from .exceptions import OutputError
from .field_map import DERIVED_FIELDS, FIELD_INDEX, STATE_FIELDS, embed_points
from .planewave import center_of_mass_velocity

logger = logging.getLogger(__name__)

CELL_TYPES = {2: vtk.VTK_TRIANGLE, 3: vtk.VTK_TETRA}
SNAPSHOT_FIELDS = ('b1', 'b2', 'p')


def ensure_directory(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc))
    return path


def _open(path, mode='w'):
    directory = os.path.dirname(os.path.abspath(path))
    ensure_directory(directory)
    try:
        return open(path, mode, encoding='utf-8', newline='')
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc))


def write_rows(path, header, rows):
    """Write a UTF-8 CSV with a header row."""
    with _open(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    logger.debug('wrote %s', path)
    return path


def write_matrix(path, matrix):
    matrix = np.atleast_2d(matrix)
    header = ['c%d' % j for j in range(matrix.shape[1])]
    return write_rows(path, header, matrix.tolist())


def write_reference_matrices(ref, directory):
    """Dump mass, derivative, lift and quadrature matrices as CSV files."""
    matrices = [('mass', ref.mass), ('Vq', ref.Vq), ('Pq', ref.Pq)]
    matrices += [('D%s' % axis, D) for axis, D in zip('rst', ref.D)]
    matrices += [('lift_face%d' % f, L) for f, L in enumerate(ref.lift)]
    return [write_matrix(os.path.join(directory, '%s.csv' % name), matrix)
            for name, matrix in matrices]


def center_of_mass(disc, state):
    """b = v + (rho_f / rho) q at the nodes, shape (3, K, Np)."""
    full = state.full()
    v = full[FIELD_INDEX['v1']:FIELD_INDEX['v3'] + 1]
    q = full[FIELD_INDEX['q1']:FIELD_INDEX['q3'] + 1]
    return center_of_mass_velocity(v, q, 1.0, disc.tables.ratio[None])


def nodal_fields(disc, state, names):
    full = state.full()
    b = None
    out = []
    for name in names:
        if name in DERIVED_FIELDS:
            if b is None:
                b = center_of_mass(disc, state)
            out.append(b[DERIVED_FIELDS.index(name)])
        elif name in FIELD_INDEX:
            out.append(full[FIELD_INDEX[name]])
        else:
            raise OutputError(name, 'unknown output field')
    return out


def write_snapshot(disc, state, path, fields=SNAPSHOT_FIELDS):
    """Legacy ASCII VTK file over the linear sub-cells of every element."""
    mesh, ref = disc.mesh, disc.ref
    values = nodal_fields(disc, state, fields)
    coords = mesh.map_points(ref.nodes).reshape(-1, mesh.dim)
    coords = embed_points(coords, disc.config.plane)

    grid = vtk.vtkUnstructuredGrid()
    points = vtk.vtkPoints()
    points.SetNumberOfPoints(len(coords))
    for i, xyz in enumerate(coords):
        points.SetPoint(i, *xyz)
    grid.SetPoints(points)

    sub = ref.nodes_for_plot()
    cell_type = CELL_TYPES[mesh.dim]
    grid.Allocate(mesh.K * len(sub))
    for k in range(mesh.K):
        for cell in sub:
            grid.InsertNextCell(cell_type, len(cell),
                                [int(k * ref.Np + i) for i in cell])

    for name, data in zip(fields, values):
        array = vtk.vtkDoubleArray()
        array.SetName(name)
        array.SetNumberOfComponents(1)
        array.SetNumberOfTuples(data.size)
        for i, value in enumerate(data.ravel()):
            array.SetValue(i, float(value))
        grid.GetPointData().AddArray(array)

    ensure_directory(os.path.dirname(os.path.abspath(path)))
    writer = vtk.vtkUnstructuredGridWriter()
    writer.SetFileName(str(path))
    writer.SetFileTypeToASCII()
    writer.SetInputData(grid)
    if writer.Write() != 1:
        raise OutputError(path, 'VTK writer failed')
    logger.debug('snapshot t=%g written to %s', state.t, path)
    return path


class ReceiverRecorder(object):
    """Per-receiver CSV of all fields and b, sampled every ``stride`` steps."""

    def __init__(self, disc, points, directory, stride=1):
        self.disc = disc
        self.points = np.atleast_2d(np.asarray(points, dtype=float)) \
            if len(points) else np.zeros((0, disc.mesh.dim))
        self.stride = int(stride)
        elements, ref_points = disc.mesh.locate(self.points) \
            if len(self.points) else (np.zeros(0, int), self.points)
        self.elements = elements
        self.basis = disc.ref.interpolation_matrix(ref_points) \
            if len(self.points) else np.zeros((0, disc.ref.Np))
        self.header = ('t',) + STATE_FIELDS + DERIVED_FIELDS
        self.paths = [os.path.join(directory, 'receiver_%03d.csv' % i)
                      for i in range(len(self.points))]
        self._handles = [_open(path) for path in self.paths]
        self._writers = [csv.writer(handle) for handle in self._handles]
        for writer in self._writers:
            writer.writerow(self.header)

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def sample(self, state):
        """Field and b values at every receiver, shape (npts, 16)."""
        full = state.full()
        b = center_of_mass(self.disc, state)
        rows = []
        for k, phi in zip(self.elements, self.basis):
            rows.append(np.concatenate([full[:, k, :] @ phi,
                                        b[:, k, :] @ phi]))
        return np.array(rows).reshape(len(rows), len(self.header) - 1)

    def record(self, step, state):
        if not self._writers or step % self.stride:
            return
        for writer, row in zip(self._writers, self.sample(state)):
            writer.writerow([repr(state.t)] + [repr(float(x)) for x in row])

    def close(self):
        for handle in self._handles:
            handle.close()
        self._handles = []
        self._writers = []


class EnergyTrace(object):
    header = ('step', 't', 'energy')

    def __init__(self, path=None):
        self.path = path
        self.rows = []
        self._handle = None
        if path:
            self._handle = _open(path)
            self._writer = csv.writer(self._handle)
            self._writer.writerow(self.header)

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    @property
    def energies(self):
        return np.array([row[2] for row in self.rows])

    def append(self, step, t, energy):
        row = (int(step), float(t), float(energy))
        self.rows.append(row)
        if self._handle is not None:
            self._writer.writerow([row[0], repr(row[1]), repr(row[2])])

    def close(self):
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def versions():
    return {'porowave': VERSION, 'numpy': np.__version__,
            'scipy': scipy.__version__, 'vtk': vtk.vtkVersion.GetVTKVersion(),
            'python': platform.python_version()}


class RunManifest(object):
    """JSON-lines log of a run: config echo, versions, timings, outputs."""

    def __init__(self, path):
        self.path = path
        self.started = time.time()
        self._handle = _open(path)

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def write(self, event, **payload):
        record = {'event': event,
                  'elapsed': round(time.time() - self.started, 6)}
        record.update(payload)
        try:
            self._handle.write(json.dumps(record, sort_keys=True,
                                          default=_jsonable) + '\n')
            self._handle.flush()
        except OSError as exc:
            raise OutputError(self.path, exc.strerror or str(exc))

    def start(self, experiment, config):
        self.write('start', experiment=experiment, config=config,
                   versions=versions())

    def close(self):
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return str(value)
