"""Abrikosov energy on the lowest Landau band.

The functional (1/2) int |u|^4 - int |u|^2 is minimized over the N-dimensional
band E_R.  The amplitude is eliminated in closed form: writing u = t v, the
optimum over t gives

    e_Ab(R) = - |v|_2^4 / (2 |v|_4^4)  minimized over directions v,
            = - R^2 / (2 beta_min),

with the Abrikosov ratio beta(v) = R^2 |v|_4^4 / |v|_2^4 >= 1 (Cauchy-Schwarz,
equality only for constant modulus).  The search space is the 2N real
coefficients of v in the orthonormal band basis; energies are evaluated from
the precomputed node values of the basis fields.

On the square cell the optimal direction is the square vortex lattice with
beta close to 1.18.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._descent import DescentOptions, run_lbfgs, spawn_seeds
from .grid import Grid, GridError
from .operator import EigenResult

__all__ = ["LLLProblem", "AbrikosovResult", "abrikosov_energy", "minimize_abrikosov"]


@dataclass(frozen=True)
class LLLProblem:
    """Orthonormal lowest-band basis (from lll_basis) plus its grid."""

    grid: Grid
    basis: np.ndarray        # (N, ny, nx), orthonormal in the weighted product

    def __post_init__(self):
        if self.basis.ndim != 3 or self.basis.shape[1:] != self.grid.shape:
            raise GridError("basis fields do not match the grid")

    @classmethod
    def from_eigen(cls, grid: Grid, eig: EigenResult) -> "LLLProblem":
        return cls(grid=grid, basis=np.asarray(eig.fields))

    @property
    def flux(self) -> int:
        return self.basis.shape[0]

    @cached_property
    def _gram_ok(self) -> bool:
        N = self.flux
        G = np.empty((N, N), dtype=complex)
        for a in range(N):
            for b in range(N):
                G[a, b] = self.grid.inner(self.basis[a], self.basis[b])
        return bool(np.max(np.abs(G - np.eye(N))) < 1e-8)

    def combine(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=complex)
        if c.shape != (self.flux,):
            raise ValueError(f"coefficient vector must have length {self.flux}")
        return np.tensordot(c, self.basis, axes=(0, 0))


def abrikosov_energy(p: LLLProblem, c: np.ndarray) -> float:
    """(1/2)|u|_4^4 - |u|_2^2 for u = sum_k c_k phi_k."""
    c = np.asarray(c, dtype=complex)
    if not np.any(c):
        raise ValueError("coefficient vector must be nonzero")
    u = p.combine(c)
    l2_sq, l4_4, _ = p.grid.norms(u)
    return 0.5 * l4_4 - l2_sq


@dataclass
class AbrikosovResult:
    e_ab: float
    per_area: float
    beta: float
    coefficients: np.ndarray      # optimal direction, |c|_2 = 1
    u: np.ndarray                 # band field at the optimal amplitude
    restart_betas: list[float]
    iterations: int
    converged: bool
    seed: int


def _beta_fg(p: LLLProblem):
    """beta(c)/R^2 = Q(u)/M(u)^2 over real-packed coefficients."""
    g = p.grid
    w = g.weights
    N = p.flux

    def fg(z):
        c = z[:N] + 1j * z[N:]
        u = p.combine(c)
        a2 = u.real ** 2 + u.imag ** 2
        M = float(np.sum(w * a2))
        Q = float(np.sum(w * a2 * a2))
        F = Q / M ** 2
        # dQ/d conj(c_k) = 2 <|u|^2 u, phi_k>_w ; dM/d conj(c_k) = c_k
        cube = w * a2 * u
        dQ = 2.0 * np.tensordot(np.conj(p.basis), cube, axes=((1, 2), (0, 1)))
        dF = dQ / M ** 2 - (2.0 * Q / M ** 3) * c
        grad = 2.0 * np.concatenate([dF.real, dF.imag])
        return F, grad

    return fg


def minimize_abrikosov(p: LLLProblem, opts: DescentOptions | None = None) -> AbrikosovResult:
    """Minimize over band directions; the amplitude is analytic.

    N = 1 needs no search.  The minimizer is reported up to the global phase
    and magnetic-translation orbit; only e_Ab and beta are contractual.
    """
    opts = opts or DescentOptions()
    g = p.grid
    N = p.flux
    R2 = g.R ** 2

    def finalize(c, betas, iters, conv):
        c = np.asarray(c, dtype=complex)
        c = c / np.linalg.norm(c)
        u_dir = p.combine(c)
        l2_sq, l4_4, _ = g.norms(u_dir)
        beta = R2 * l4_4 / l2_sq ** 2
        e_ab = -R2 / (2.0 * beta)
        t2 = l2_sq / l4_4          # optimal amplitude for the direction
        u = np.sqrt(t2) * u_dir
        return AbrikosovResult(e_ab=e_ab, per_area=e_ab / R2, beta=beta,
                               coefficients=c, u=u, restart_betas=betas,
                               iterations=iters, converged=conv, seed=opts.seed)

    if N == 1:
        return finalize(np.ones(1), [], 0, True)

    fg = _beta_fg(p)
    best = None
    betas: list[float] = []
    total_it = 0
    starts: list[np.ndarray] = [np.ones(N, dtype=complex)]
    for s in spawn_seeds(opts.seed, max(opts.restarts, 4)):
        rng = np.random.default_rng(s)
        starts.append(rng.normal(size=N) + 1j * rng.normal(size=N))
    conv = True
    for c0 in starts:
        z0 = np.concatenate([c0.real, c0.imag]) / np.linalg.norm(c0)
        rep = run_lbfgs(fg, z0, opts)
        betas.append(R2 * rep.fun)
        total_it += rep.iterations
        if best is None or rep.fun < best.fun:
            best = rep
    c = best.x[:N] + 1j * best.x[N:]
    return finalize(c, betas, total_it, conv and best.converged)
