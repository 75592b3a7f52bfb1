"""Lowest-band Abrikosov energy and the square-lattice ratio."""

import numpy as np
import pytest

from glbulk._descent import DescentOptions
from glbulk.abrikosov import LLLProblem, abrikosov_energy, minimize_abrikosov
from glbulk.grid import build_links, periodic_grid
from glbulk.operator import MagneticOperator, lll_basis


def band_problem(N, n, seed=0):
    g = periodic_grid(N, n)
    basis = lll_basis(MagneticOperator(g, build_links(g)), seed=seed)
    return LLLProblem.from_eigen(g, basis)


@pytest.fixture(scope="module")
def n1():
    return band_problem(1, 48)


@pytest.fixture(scope="module")
def n8():
    return band_problem(8, 96)


def test_energy_rejects_zero_and_mismatch(n1):
    with pytest.raises(ValueError):
        abrikosov_energy(n1, np.zeros(1))
    with pytest.raises(ValueError):
        abrikosov_energy(n1, np.ones(3))


def test_single_state_quartic_closed_form(n1):
    # E(t) = t^4 Q/2 - t^2 M: check against direct arithmetic and the
    # analytic optimum -M^2/(2Q)
    phi = n1.basis[0]
    M, Q, _ = n1.grid.norms(phi)
    for t in (0.5, 1.0, 1.7):
        assert abrikosov_energy(n1, np.array([t])) == pytest.approx(
            0.5 * t ** 4 * Q - t ** 2 * M, rel=1e-12)
    res = minimize_abrikosov(n1)
    assert res.e_ab == pytest.approx(-M ** 2 / (2 * Q), rel=1e-12)
    assert res.beta == pytest.approx(n1.grid.R ** 2 * Q / M ** 2, rel=1e-12)
    assert res.iterations == 0     # no search for a single direction


def test_phase_invariance(n8):
    rng = np.random.default_rng(4)
    c = rng.normal(size=8) + 1j * rng.normal(size=8)
    e0 = abrikosov_energy(n8, c)
    assert abrikosov_energy(n8, np.exp(0.83j) * c) == pytest.approx(e0, rel=1e-12)


def test_beta_at_least_one_on_random_directions(n8):
    # Cauchy-Schwarz: |u|_2^4 <= R^2 |u|_4^4 on the discrete quadrature
    g = n8.grid
    rng = np.random.default_rng(9)
    for _ in range(50):
        c = rng.normal(size=8) + 1j * rng.normal(size=8)
        u = n8.combine(c)
        M, Q, _ = g.norms(u)
        assert g.R ** 2 * Q / M ** 2 >= 1.0 - 1e-12


def test_brute_force_oracle_two_states():
    # N=2: scan the direction sphere c = (cos a, sin a e^{i p}) on a fine grid
    # and compare with the solver's minimum
    p2 = band_problem(2, 48)
    g = p2.grid
    best = np.inf
    for a in np.linspace(0.0, np.pi / 2, 121):
        cs = np.array([np.cos(a), np.sin(a)])
        for ph in np.linspace(0.0, 2 * np.pi, 181, endpoint=False):
            c = cs * np.array([1.0, np.exp(1j * ph)])
            u = p2.combine(c)
            M, Q, _ = g.norms(u)
            best = min(best, g.R ** 2 * Q / M ** 2)
    res = minimize_abrikosov(p2, DescentOptions(restarts=4, seed=0))
    assert res.beta <= best + 1e-9              # solver at least as good
    assert res.beta == pytest.approx(best, rel=2e-3)  # scan resolution


def test_square_lattice_ratio_and_range(n8):
    res = minimize_abrikosov(n8, DescentOptions(restarts=6, seed=2))
    assert -0.5 <= res.per_area < 0.0
    assert res.beta == pytest.approx(1.18, abs=0.02)
    assert res.e_ab == pytest.approx(-n8.grid.R ** 2 / (2 * res.beta), rel=1e-12)


def test_beta_stable_under_refinement_and_flux(n8):
    betas = [minimize_abrikosov(n8, DescentOptions(restarts=4, seed=3)).beta]
    for N, n in ((8, 128), (16, 96)):
        p = band_problem(N, n)
        betas.append(minimize_abrikosov(p, DescentOptions(restarts=4, seed=3)).beta)
    spread = (max(betas) - min(betas)) / np.mean(betas)
    assert spread < 0.015      # stable to two significant digits
