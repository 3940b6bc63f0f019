import numpy as np

from porowave.experiments import uniform_mesh
from porowave.material import UniformField, nondimensionalize
from porowave.refelem import build_reference
from porowave.solver import Discretization, SolverConfig

def random_state(disc, seed=0):
    rng = np.random.default_rng(seed)
    return disc.state(rng.standard_normal(disc.shape))


def scaled_discretization(material, dim=2, k1d=2, N=2, boundary='abc',
                          **options):
    """Discretization of a box in nondimensional units."""
    mesh = uniform_mesh(dim, k1d, boundary=boundary)
    field = UniformField(nondimensionalize(material))
    return Discretization(mesh, build_reference(dim, N), field,
                          SolverConfig(**options))
