import warnings

import numpy as np
import pytest

from roughflow.geometry import CompactSet, DomainSpec
from roughflow.elliptic import build_hodge_basis, discretize


def circle_coords(radius=1.0, n=512, center=(0.0, 0.0)):
    t = 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


@pytest.fixture(scope="session")
def disk_spec():
    return DomainSpec("bounded", (), (-1, 1, -1, 1), outer=circle_coords())


@pytest.fixture(scope="session")
def annulus_spec():
    return DomainSpec(
        "bounded",
        (CompactSet.disk((0.0, 0.0), 0.25, n=64),),
        (-1, 1, -1, 1),
        outer=circle_coords(),
    )


@pytest.fixture(scope="session")
def two_obstacle_spec():
    return DomainSpec(
        "bounded",
        (CompactSet.disk((-0.45, 0.0), 0.18, n=48), CompactSet.disk((0.5, 0.1), 0.15, n=48)),
        (-1, 1, -1, 1),
        outer=circle_coords(),
    )


@pytest.fixture(scope="session")
def disk_grid_256(disk_spec):
    return discretize(disk_spec, 256)


@pytest.fixture(scope="session")
def annulus_grid_256(annulus_spec):
    return discretize(annulus_spec, 256)


@pytest.fixture(scope="session")
def annulus_basis_256(annulus_grid_256):
    return build_hodge_basis(annulus_grid_256)


@pytest.fixture(scope="session")
def two_obstacle_grid_256(two_obstacle_spec):
    return discretize(two_obstacle_spec, 256)


@pytest.fixture(scope="session")
def two_obstacle_basis_256(two_obstacle_grid_256):
    return build_hodge_basis(two_obstacle_grid_256)


@pytest.fixture(autouse=True)
def _quiet_underresolution():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
