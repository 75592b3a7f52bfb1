"""Covariant Laplacian: stencil, self-adjointness, Landau spectrum."""

import numpy as np
import pytest

from glbulk.grid import (BoundaryCondition, GridError, LinkField, build_grid,
                         build_links, periodic_grid)
from glbulk.operator import (MagneticOperator, SolverError, lll_basis,
                             lowest_eigenpairs)

RN8 = np.sqrt(16 * np.pi)


def free_links(g):
    """Zero-field test harness: every link phase = 1."""
    real = build_links(g)
    return LinkField(grid=g, ux=np.ones_like(real.ux), uy=np.ones_like(real.uy))


def test_free_neumann_kills_constants():
    g = build_grid(RN8, 24, BoundaryCondition.neumann())
    op = MagneticOperator(g, free_links(g))
    out = op.apply(np.ones(g.shape, dtype=complex))
    assert np.abs(out).max() < 1e-12


def test_free_dirichlet_sees_the_boundary():
    g = build_grid(RN8, 24, BoundaryCondition.dirichlet())
    op = MagneticOperator(g, free_links(g))
    u = g.project(np.ones(g.shape))
    out = op.apply(u)
    assert np.abs(out[1, 1:-1]).max() > 0.1      # boundary-adjacent row
    inner = out[3:-3, 3:-3]
    assert np.abs(inner).max() < 1e-12


@pytest.mark.parametrize("bc", [BoundaryCondition.periodic(8),
                                BoundaryCondition.neumann(),
                                BoundaryCondition.dirichlet()])
def test_self_adjoint_positive_form_identity(bc):
    g = build_grid(RN8, 24, bc)
    op = MagneticOperator(g, build_links(g))
    rng = np.random.default_rng(12)
    for _ in range(100):
        u = g.project(rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
        v = g.project(rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
        Pu, Pv = op.apply(u), op.apply(v)
        lhs, rhs = g.inner(Pu, v), g.inner(u, Pv)
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)
        quad = g.inner(Pu, u)
        assert quad.real >= 0
        assert abs(quad.imag) <= 1e-10 * max(quad.real, 1.0)
        assert abs(quad.real - op.form_value(u)) <= 1e-10 * max(quad.real, 1.0)


def test_gauge_covariance_of_the_form():
    g = periodic_grid(4, 32)
    links = build_links(g)
    op = MagneticOperator(g, links)
    rng = np.random.default_rng(3)
    u = g.random_field(rng)
    chi = rng.normal(size=g.shape)
    op2 = MagneticOperator(g, links.gauge_transformed(chi))
    q1 = op.form_value(u)
    q2 = op2.form_value(np.exp(1j * chi) * u)
    assert abs(q1 - q2) <= 1e-12 * q1


def test_dense_oracle_small_grids():
    # shift-invert path against a dense eigensolve of the same form matrix
    for bc in (BoundaryCondition.periodic(2), BoundaryCondition.dirichlet()):
        R = np.sqrt(4 * np.pi)
        g = build_grid(R, 40, bc)
        op = MagneticOperator(g, build_links(g))
        A = op.form_matrix.toarray()
        w = op.weight_matrix.diagonal()
        sw = 1.0 / np.sqrt(w)
        dense = np.sort(np.linalg.eigvalsh((A * sw[None, :]) * sw[:, None]))[:4]
        res = lowest_eigenpairs(op, 4, tol=1e-10, seed=1)
        assert np.allclose(res.values, dense, rtol=1e-8, atol=1e-9)
        assert np.all(res.residuals < 1e-6)


def test_landau_spectrum_and_refinement_order():
    # lowest band at 1 with multiplicity N, next band near 3; O(h^2) defect
    g = periodic_grid(8, 96)
    op = MagneticOperator(g, build_links(g))
    res = lowest_eigenpairs(op, 10, tol=1e-9, seed=0)
    assert np.abs(res.values[:8] - 1.0).max() < 2e-2
    assert res.values[8] > 2.5
    assert np.all(res.residuals < 1e-6)
    # band coherence: the 8 lowest agree pairwise far tighter than the gap
    assert res.values[7] - res.values[0] < 1e-6

    defects = []
    for n in (24, 48, 96):
        gn = periodic_grid(4, n)
        opn = MagneticOperator(gn, build_links(gn))
        defects.append(abs(lowest_eigenpairs(opn, 1, seed=0).values[0] - 1.0))
    order1 = np.log2(defects[0] / defects[1])
    order2 = np.log2(defects[1] / defects[2])
    assert order1 >= 1.8 and order2 >= 1.8


def test_eigenvalue_ordering_across_closures():
    # form-domain inclusion at matched grid: neumann <= periodic <= dirichlet
    vals = {}
    for bc in (BoundaryCondition.neumann(), BoundaryCondition.periodic(8),
               BoundaryCondition.dirichlet()):
        g = build_grid(RN8, 32, bc)
        op = MagneticOperator(g, build_links(g))
        vals[bc.kind] = lowest_eigenpairs(op, 1, seed=0).values[0]
    assert vals["neumann"] <= vals["periodic"] <= vals["dirichlet"]
    assert vals["neumann"] < 1.0 < vals["dirichlet"]


def test_eigenfields_orthonormal():
    g = periodic_grid(4, 48)
    op = MagneticOperator(g, build_links(g))
    res = lowest_eigenpairs(op, 6, seed=0)
    G = np.array([[g.inner(a, b) for b in res.fields] for a in res.fields])
    assert np.abs(G - np.eye(6)).max() < 1e-8


def test_lll_basis_dimensions():
    g = periodic_grid(8, 96)
    res = lll_basis(MagneticOperator(g, build_links(g)), seed=0)
    assert res.k == 8
    g1 = periodic_grid(1, 48)
    res1 = lll_basis(MagneticOperator(g1, build_links(g1)), seed=0)
    assert res1.k == 1


def test_lll_basis_rejects_bounded_closure():
    g = build_grid(RN8, 48, BoundaryCondition.dirichlet())
    with pytest.raises(GridError):
        lll_basis(MagneticOperator(g, build_links(g)))


def test_apply_rejects_wrong_shape():
    g = periodic_grid(4, 32)
    op = MagneticOperator(g, build_links(g))
    with pytest.raises(GridError):
        op.apply(np.ones((5, 5), dtype=complex))
