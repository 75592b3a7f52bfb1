"""Geometry, link phases, quadrature."""

import numpy as np
import pytest

from glbulk.grid import (BoundaryCondition, GridError, build_grid, build_links,
                         flux_from_side, periodic_grid)


def test_periodic_constructor_arithmetic():
    R = np.sqrt(16 * np.pi)  # N = 8
    g = build_grid(R, 64, BoundaryCondition.periodic(8))
    assert g.h == pytest.approx(R / 64, rel=1e-15)
    assert g.h * g.n == g.R  # exact in the stored representation
    assert g.nx == g.ny == 64


def test_periodic_rejects_unquantized_side():
    with pytest.raises(GridError):
        build_grid(5.0, 64, BoundaryCondition.periodic(4))
    with pytest.raises(GridError):
        flux_from_side(5.0)


def test_dirichlet_accepts_any_side():
    g = build_grid(5.0, 64, BoundaryCondition.dirichlet())
    assert g.nx == 65
    assert g.R == pytest.approx(5.0)


def test_too_few_points_rejected():
    with pytest.raises(GridError):
        build_grid(5.0, 8, BoundaryCondition.neumann())


def test_bc_validation():
    with pytest.raises(GridError):
        BoundaryCondition("robin")
    with pytest.raises(GridError):
        BoundaryCondition("periodic")          # missing flux
    with pytest.raises(GridError):
        BoundaryCondition("dirichlet", flux=3)


@pytest.mark.parametrize("make", [
    lambda: periodic_grid(8, 48),
    lambda: build_grid(np.sqrt(16 * np.pi), 48, BoundaryCondition.neumann()),
    lambda: build_grid(np.sqrt(16 * np.pi), 48, BoundaryCondition.dirichlet()),
])
def test_plaquette_flux_uniform(make):
    # oriented plaquette product = exp(-i h^2) for every cell, seam included
    g = make()
    links = build_links(g)
    prod = links.plaquette_products()
    assert np.abs(np.abs(prod) - 1.0).max() < 1e-14
    dev = np.angle(prod * np.exp(1j * g.h ** 2))
    assert np.abs(dev).max() < 1e-12


def test_plaquette_flux_quarters_when_doubling_n():
    g1 = periodic_grid(4, 32)
    g2 = periodic_grid(4, 64)
    f1 = np.angle(build_links(g1).plaquette_products()[3, 5])
    f2 = np.angle(build_links(g2).plaquette_products()[3, 5])
    assert f1 == pytest.approx(-g1.h ** 2, abs=1e-13)
    assert f2 == pytest.approx(f1 / 4, abs=1e-13)


def test_norms_constant_field_neumann():
    g = build_grid(np.sqrt(16 * np.pi), 32, BoundaryCondition.neumann())
    u = np.ones(g.shape, dtype=complex)
    l2_sq, l4_4, sup = g.norms(u)
    assert l2_sq == pytest.approx(g.R ** 2, rel=1e-12)
    assert l4_4 == pytest.approx(g.R ** 2, rel=1e-12)
    assert sup == 1.0


def test_norms_constant_field_periodic():
    g = periodic_grid(4, 32)
    l2_sq, _, _ = g.norms(np.ones(g.shape, dtype=complex))
    assert l2_sq == pytest.approx(g.R ** 2, rel=1e-12)


def test_norms_zero_and_spike():
    g = build_grid(np.sqrt(16 * np.pi), 32, BoundaryCondition.neumann())
    assert g.norms(g.zeros()) == (0.0, 0.0, 0.0)
    u = g.zeros()
    u[7, 9] = 3.0          # interior node: full weight
    l2_sq, l4_4, sup = g.norms(u)
    assert l2_sq == pytest.approx(g.h ** 2 * 9.0, rel=1e-12)
    assert l4_4 == pytest.approx(g.h ** 2 * 81.0, rel=1e-12)
    assert sup == 3.0


def test_field_shape_checked():
    g = periodic_grid(4, 32)
    with pytest.raises(GridError):
        g.norms(np.ones((3, 3)))


def test_dirichlet_projection_zeroes_boundary():
    g = build_grid(6.0, 32, BoundaryCondition.dirichlet())
    u = g.project(np.ones(g.shape))
    assert np.all(u[g.boundary_mask] == 0)
    assert np.all(u[~g.boundary_mask] == 1)
