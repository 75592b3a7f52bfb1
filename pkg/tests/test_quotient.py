"""Constrained linear quotient: invariances, minimization, duality."""

import numpy as np
import pytest

from glbulk._descent import DescentOptions
from glbulk.bulk import BulkProblem, minimize_bulk
from glbulk.grid import BoundaryCondition, build_grid, build_links, periodic_grid
from glbulk.operator import MagneticOperator, lowest_eigenpairs
from glbulk.quotient import (QuotientProblem, duality_check, minimize_quotient,
                             quotient_value)

RN8 = np.sqrt(16 * np.pi)


@pytest.fixture(scope="module")
def periodic_setup():
    g = periodic_grid(8, 48)
    return g, build_links(g)


def test_degenerate_b_refused_without_override(periodic_setup):
    g, links = periodic_setup
    with pytest.raises(ValueError):
        QuotientProblem(b=0.9999, grid=g, links=links)
    QuotientProblem(b=0.9999, grid=g, links=links, allow_degenerate=True)
    QuotientProblem(b=0.999, grid=g, links=links)  # exactly at the margin: allowed


def test_zero_field_rejected(periodic_setup):
    g, links = periodic_setup
    p = QuotientProblem(b=0.5, grid=g, links=links)
    with pytest.raises(ValueError):
        quotient_value(p, g.zeros())


def test_scale_and_gauge_invariance(periodic_setup):
    g, links = periodic_setup
    p = QuotientProblem(b=0.5, grid=g, links=links)
    rng = np.random.default_rng(5)
    u = g.random_field(rng)
    v0 = quotient_value(p, u)
    assert quotient_value(p, 3.0 * u) == pytest.approx(v0, rel=1e-12)
    assert quotient_value(p, (-0.7 + 0.9j) * u) == pytest.approx(v0, rel=1e-12)
    chi = rng.normal(size=g.shape)
    p2 = QuotientProblem(b=0.5, grid=g, links=links.gauge_transformed(chi))
    assert quotient_value(p2, np.exp(1j * chi) * u) == pytest.approx(v0, rel=1e-12)


def test_quotient_of_eigenfield_closed_form(periodic_setup):
    # for an exact discrete eigenfield: (b lam - 1) |v|_2^2 / |v|_4^2
    g, links = periodic_setup
    op = MagneticOperator(g, links)
    eig = lowest_eigenpairs(op, 1, seed=1)
    v = eig.fields[0]
    M, Q, _ = g.norms(v)
    b = 0.5
    p = QuotientProblem(b=b, grid=g, links=links)
    expected = (b * eig.values[0] - 1.0) * M / np.sqrt(Q)
    assert quotient_value(p, v) == pytest.approx(expected, rel=1e-9)


def test_hessian_vector_products_match_finite_differences():
    g = periodic_grid(2, 24)
    links = build_links(g)
    from glbulk.bulk import _make_fg as bulk_fg
    from glbulk.quotient import _make_fg as quot_fg
    from glbulk.operator import MagneticOperator
    op = MagneticOperator(g, links)
    rng = np.random.default_rng(11)
    z = rng.normal(size=2 * g.num_nodes) * 0.4
    dz = rng.normal(size=2 * g.num_nodes)
    for maker in (bulk_fg, quot_fg):
        fg, hessp = maker(op, 0.6)
        eps = 1e-6
        fd = (fg(z + eps * dz)[1] - fg(z - eps * dz)[1]) / (2 * eps)
        an = hessp(z, dz)
        assert np.linalg.norm(fd - an) <= 1e-5 * np.linalg.norm(fd)


def test_amplitude_scan_confirms_t_optimum():
    # for fixed direction v with |v|_4 = 1: min_t t^2 L + t^4/2 = -L^2/2 at t^2 = -L
    L = -2.31
    ts = np.linspace(0.0, 2.5, 20001)
    vals = ts ** 2 * L + 0.5 * ts ** 4
    k = np.argmin(vals)
    assert vals[k] == pytest.approx(-L ** 2 / 2, abs=1e-6)
    assert ts[k] ** 2 == pytest.approx(-L, abs=1e-3)


def test_minimize_and_duality(periodic_setup):
    g, links = periodic_setup
    opts = DescentOptions(restarts=2, seed=2)
    b = 0.5
    qs = minimize_quotient(QuotientProblem(b=b, grid=g, links=links), opts)
    assert qs.m < 0 and not qs.nonnegative
    assert g.norms(qs.u)[1] == pytest.approx(1.0, abs=1e-10)
    bs = minimize_bulk(BulkProblem(b=b, grid=g, links=links), opts,
                       extra_seeds=[np.sqrt(-qs.m) * qs.u])
    qs2 = minimize_quotient(QuotientProblem(b=b, grid=g, links=links), opts,
                            extra_seeds=[bs.u / bs.l4_4 ** 0.25])
    assert duality_check(qs2, bs) <= 1e-4
    # multiplier identification: b P u - u = m |u|^2 u at |u|_4 = 1
    assert qs2.multiplier_residual <= 1e-4


def test_monotone_in_b(periodic_setup):
    g, links = periodic_setup
    opts = DescentOptions(restarts=2, seed=3)
    m3 = minimize_quotient(QuotientProblem(b=0.3, grid=g, links=links), opts).m
    m7 = minimize_quotient(QuotientProblem(b=0.7, grid=g, links=links), opts).m
    assert m3 <= m7


def test_nonnegative_regime_flagged():
    # small Dirichlet square: lambda_1 > 1/b, the quotient cannot go negative
    g = build_grid(4.0, 32, BoundaryCondition.dirichlet())
    links = build_links(g)
    p = QuotientProblem(b=0.999, grid=g, links=links)
    s = minimize_quotient(p, DescentOptions(restarts=1, seed=4))
    assert s.nonnegative and s.m >= 0.0


def test_duality_check_preconditions(periodic_setup):
    g, links = periodic_setup
    opts = DescentOptions(restarts=1, seed=5)
    qs = minimize_quotient(QuotientProblem(b=0.5, grid=g, links=links), opts)
    bs = minimize_bulk(BulkProblem(b=0.7, grid=g, links=links), opts)
    with pytest.raises(ValueError):
        duality_check(qs, bs)  # mismatched b


def test_trivial_regime_defect_zero():
    g = build_grid(4.0, 32, BoundaryCondition.dirichlet())
    links = build_links(g)
    opts = DescentOptions(restarts=1, seed=6)
    qs = minimize_quotient(QuotientProblem(b=0.999, grid=g, links=links), opts)
    bs = minimize_bulk(BulkProblem(b=0.999, grid=g, links=links), opts)
    assert bs.trivial and qs.nonnegative
    assert duality_check(qs, bs) == 0.0
