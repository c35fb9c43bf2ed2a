"""Shared fixtures: grids, operators, and converged reference states.

Ground-state solves are session-scoped; tests treat them as read-only.
"""

import numpy as np
import pytest

from mclr import (OneBodyOperator, PairCoupling, TwoBodyKernel, build_grid,
                  harmonic_potential, kinetic_matrix)
from mclr import fockspace as fs
from mclr import groundstate as gs


def oscillator_h(grid, omega=1.0, mass=1.0):
    return OneBodyOperator(kinetic_matrix(grid, mass).matrix
                           + harmonic_potential(grid, omega).matrix)


@pytest.fixture(scope="session")
def grid64():
    return build_grid(64, -8.0, 8.0)


@pytest.fixture(scope="session")
def grid48():
    return build_grid(48, -6.0, 6.0)


@pytest.fixture(scope="session")
def h64(grid64):
    return oscillator_h(grid64)


@pytest.fixture(scope="session")
def h48(grid48):
    return oscillator_h(grid48)


@pytest.fixture(scope="session")
def bos_m1(grid64, h64):
    space = fs.enumerate_configs("boson", N=2, M=1)
    return gs.solve_mchx(space, grid64, h64,
                         TwoBodyKernel("contact", strength=0.1))


@pytest.fixture(scope="session")
def bos_m2(grid64, h64):
    space = fs.enumerate_configs("boson", N=2, M=2)
    return gs.solve_mchx(space, grid64, h64,
                         TwoBodyKernel("contact", strength=0.1))


@pytest.fixture(scope="session")
def bos_m3(grid64, h64):
    space = fs.enumerate_configs("boson", N=2, M=3)
    return gs.solve_mchx(space, grid64, h64,
                         TwoBodyKernel("contact", strength=0.5))


@pytest.fixture(scope="session")
def bos_m2_48(grid48, h48):
    space = fs.enumerate_configs("boson", N=2, M=2)
    return gs.solve_mchx(space, grid48, h48,
                         TwoBodyKernel("contact", strength=0.3))


@pytest.fixture(scope="session")
def ferm_m2(grid64, h64):
    space = fs.enumerate_configs("fermion", N=2, M=2)
    return gs.solve_mchx(space, grid64, h64,
                         TwoBodyKernel("gaussian", strength=0.3, width=0.5))


@pytest.fixture(scope="session")
def ferm_m3(grid64, h64):
    space = fs.enumerate_configs("fermion", N=3, M=3)
    return gs.solve_mchx(space, grid64, h64,
                         TwoBodyKernel("gaussian", strength=0.3, width=0.5))


@pytest.fixture(scope="session")
def dist_grids():
    return [build_grid(48, -8.0, 8.0), build_grid(48, -8.0, 8.0)]


@pytest.fixture(scope="session")
def dist_h(dist_grids):
    return [oscillator_h(g) for g in dist_grids]


@pytest.fixture(scope="session")
def dist_44(dist_grids, dist_h):
    space = fs.enumerate_configs("distinguishable", M_list=(4, 4))
    coupling = PairCoupling.bilinear(dist_grids, 0, 1, 0.2)
    return gs.solve_mch_dist(space, dist_grids, dist_h, coupling)


@pytest.fixture(scope="session")
def dist_11(dist_grids, dist_h):
    space = fs.enumerate_configs("distinguishable", M_list=(1, 1))
    coupling = PairCoupling.bilinear(dist_grids, 0, 1, 0.2)
    return gs.solve_mch_dist(space, dist_grids, dist_h, coupling)


@pytest.fixture(scope="session")
def dist_22_uncoupled(dist_grids, dist_h):
    space = fs.enumerate_configs("distinguishable", M_list=(2, 2))
    return gs.solve_mch_dist(space, dist_grids, dist_h, None)


def random_state_vector(size, seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return c / np.linalg.norm(c)
