"""Shared test utilities: random matrix samplers and manufactured problems."""

import numpy as np

from torusma import solver
from torusma.fields import MatrixField, ScalarField, TorusGrid, constant_matrix_field


def rand_hermitian(rng, n, scale=1.0):
    b = rng.uniform(-1, 1, (n, n)) + 1j * rng.uniform(-1, 1, (n, n))
    return scale * (b + b.conj().T)


def rand_metric(rng, n):
    a = rand_hermitian(rng, n)
    return a + (abs(np.linalg.eigvalsh(a)[0]) + 1.0) * np.eye(n)


def product_cos(grid, axis_a, axis_b, amplitude):
    xa = grid.coordinate(axis_a)
    xb = grid.coordinate(axis_b)
    return ScalarField(grid, amplitude * np.cos(2 * np.pi * xa) * np.cos(2 * np.pi * xb))


def manufactured_n2(N=16, amplitude=0.05):
    """n=2 problem with exact solution amplitude*cos(2pi x1)cos(2pi x2), h = g = I."""
    grid = TorusGrid(n=2, N=N, axes=(0, 2))
    u_star = product_cos(grid, 0, 2, amplitude)
    g = np.eye(2)
    h = constant_matrix_field(grid, g)
    F, _ = solver.manufacture(grid, g, h, u_star)
    return solver.ProblemSpec(grid, g, h, F), u_star


def manufactured_n3(N=8, amplitude=0.05):
    """n=3 problem on two complex coordinates with a conformal Hermitian h."""
    grid = TorusGrid(n=3, N=N, axes=(0, 3))
    u_star = product_cos(grid, 0, 3, amplitude)
    g = np.eye(3)
    conf = 1.0 + 0.1 * np.cos(2 * np.pi * grid.coordinate(0))
    h = MatrixField(grid, conf[..., None, None] * np.eye(3))
    F, _ = solver.manufacture(grid, g, h, u_star)
    return solver.ProblemSpec(grid, g, h, F), u_star


def align_mean(values):
    return values - values.mean()
