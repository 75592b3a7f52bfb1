"""L4-constrained linear energy: the scale-invariant quotient

    G(u) = ( b q(u) - int |u|^2 ) / ( int |u|^4 )^{1/2},

whose infimum over the closure's space is the constrained ground-state
energy m(b, R).  G is exactly invariant under u -> lambda u and under gauge
rotations, so the constrained problem is solved as unconstrained descent on
G followed by renormalization to |u|_4 = 1.

At a minimizer with |u|_4 = 1 the stationarity condition reads
b P u - u = m |u|^2 u: the Lagrange multiplier is the quotient value itself.

Finite-R duality: on any space closed under scaling, decomposing u = t v with
|v|_4 = 1 and minimizing t^2 E_lin(v) + t^4/2 in t gives

    e(b, R) = -m(b, R)^2 / 2        whenever m < 0,

which is the central consistency oracle between this module and the bulk
minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._descent import DescentOptions, pack, prolong, run_lbfgs, unpack
from .bulk import BulkProblem, BulkSolution, seed_fields, _coarse_problem
from .grid import Grid, LinkField
from .operator import MagneticOperator, lowest_eigenpairs

__all__ = ["QuotientProblem", "QuotientSolution", "quotient_value",
           "minimize_quotient", "duality_check"]

DEGENERATE_MARGIN = 1e-3


@dataclass(frozen=True)
class QuotientProblem:
    """b strictly below 1 (degenerate limit refused unless overridden)."""

    b: float
    grid: Grid
    links: LinkField
    allow_degenerate: bool = False

    def __post_init__(self):
        if self.b <= 0.0:
            raise ValueError(f"b={self.b} must be positive")
        if self.b > 1.0 - DEGENERATE_MARGIN and not self.allow_degenerate:
            raise ValueError(
                f"b={self.b} is within {DEGENERATE_MARGIN} of the degenerate point 1; "
                "pass allow_degenerate=True to override")

    @cached_property
    def op(self) -> MagneticOperator:
        return MagneticOperator(self.grid, self.links)


@dataclass
class QuotientSolution:
    b: float
    m: float                       # quotient value at the minimizer
    u: np.ndarray                  # renormalized to |u|_4 = 1
    grad_norm: float
    multiplier_residual: float     # ||b P u - u - m |u|^2 u||_w at |u|_4 = 1
    nonnegative: bool              # no descent direction made the quotient negative
    restart_values: list[float]
    restarts: int
    iterations: int
    converged: bool
    seed: int
    grid: Grid = field(repr=False, default=None)

    @property
    def per_length(self) -> float:
        return self.m / self.grid.R


def quotient_value(p: QuotientProblem, u: np.ndarray) -> float:
    """G(u); rejects the zero field."""
    u = p.grid.check_field(u)
    q = p.op.form_value(u)
    l2_sq, l4_4, _ = p.grid.norms(u)
    if l4_4 <= 0.0:
        raise ValueError("quotient undefined for the zero field")
    return (p.b * q - l2_sq) / np.sqrt(l4_4)


def _make_fg(op: MagneticOperator, b: float):
    g = op.grid
    w = g.weights

    def _pieces(u):
        Au = op.form_action(u)
        q = float(np.vdot(u, Au).real)
        a2 = u.real ** 2 + u.imag ** 2
        l2_sq = float(np.sum(w * a2))
        l4_4 = float(np.sum(w * a2 * a2))
        L = b * q - l2_sq
        gL = 2.0 * (b * Au - w * u)
        gQ = 4.0 * w * a2 * u
        return a2, l4_4, L, gL, gQ

    def fg(z):
        u = unpack(g, z)
        a2, Q, L, gL, gQ = _pieces(u)
        if Q <= 0.0:
            return 0.0, np.zeros_like(z)
        sQ = np.sqrt(Q)
        grad = gL / sQ - (L / (2.0 * Q * sQ)) * gQ
        return L / sQ, pack(g, grad)

    def _dot(x, y):
        return float(np.sum(x.real * y.real + x.imag * y.imag))

    def hessp(z, dz):
        u = unpack(g, z)
        d = unpack(g, dz)
        a2, Q, L, gL, gQ = _pieces(u)
        if Q <= 0.0:
            return np.zeros_like(dz)
        sQ = np.sqrt(Q)
        re_ud = u.real * d.real + u.imag * d.imag
        HLd = 2.0 * (b * op.form_action(d) - w * d)
        HQd = 4.0 * w * (a2 * d + 2.0 * re_ud * u)
        gQd = _dot(gQ, d)
        gLd = _dot(gL, d)
        Hd = (HLd / sQ
              - 0.5 * Q ** -1.5 * (gQd * gL + gLd * gQ)
              + 0.75 * L * Q ** -2.5 * gQd * gQ
              - 0.5 * L * Q ** -1.5 * HQd)
        return pack(g, Hd)

    return fg, hessp


def minimize_quotient(p: QuotientProblem, opts: DescentOptions | None = None,
                      extra_seeds: list[np.ndarray] | None = None,
                      eig=None) -> QuotientSolution:
    """Multi-restart descent on the scale-invariant quotient.

    The quotient is negative whenever b * lambda_1 < 1 (the spectral seed
    certifies it); if every restart stays nonnegative the solution is flagged
    so the caller can tell a degenerate (b, grid) pairing from a solver
    failure.
    """
    opts = opts or DescentOptions()
    op = p.op
    g = p.grid
    if eig is None:
        k = min(g.bc.flux, 6) if g.bc.is_periodic else 1
        eig = lowest_eigenpairs(op, max(1, k), seed=opts.seed)

    coarse_winner = None
    if opts.continuation:
        cp = _coarse_problem(BulkProblem(b=min(p.b, 1.0), grid=g, links=p.links))
        if cp is not None:
            cq = QuotientProblem(b=p.b, grid=cp.grid, links=cp.links,
                                 allow_degenerate=p.allow_degenerate)
            copts = DescentOptions(restarts=opts.restarts, gtol=max(opts.gtol, 1e-7),
                                   maxiter=opts.maxiter, max_rounds=2,
                                   seed=opts.seed, continuation=False)
            cs = minimize_quotient(cq, copts)
            coarse_winner = prolong(cp.grid, g, cs.u)
    if coarse_winner is not None:
        seeds = [coarse_winner] + seed_fields(op, p.b, 0, opts.seed, eig=eig)
    else:
        seeds = seed_fields(op, p.b, opts.restarts, opts.seed, eig=eig)
    seeds = [s if g.norms(s)[1] > 0 else eig.fields[0] for s in seeds]
    if extra_seeds:
        seeds += [g.project(s) for s in extra_seeds]

    fg, hessp = _make_fg(op, p.b)
    best = None
    values: list[float] = []
    total_it = 0
    for idx, s in enumerate(seeds):
        l4 = g.norms(s)[1]
        s = s / l4 ** 0.25 if l4 > 0 else eig.fields[0]
        rep = run_lbfgs(fg, pack(g, s), opts, hessp=hessp)
        values.append(rep.fun)
        total_it += rep.iterations
        if best is None or rep.fun < best[1].fun:
            best = (idx, rep)
    _, rep = best
    u = unpack(g, rep.x)
    l4_4 = g.norms(u)[1]
    u = u / l4_4 ** 0.25
    m = quotient_value(p, u)
    # multiplier identification: residual of b P u - u = m |u|^2 u
    r = p.b * op.apply(u) - u - m * (u.real ** 2 + u.imag ** 2) * u
    mres = float(np.sqrt(g.inner(r, r).real))
    return QuotientSolution(b=p.b, m=m, u=u, grad_norm=rep.grad_norm,
                            multiplier_residual=mres,
                            nonnegative=bool(m >= 0.0),
                            restart_values=values, restarts=len(seeds),
                            iterations=total_it, converged=rep.converged,
                            seed=opts.seed, grid=g)


def duality_check(q: QuotientSolution, s: BulkSolution) -> float:
    """Relative defect |m^2/2 + e| / |e| of the finite-R duality identity.

    Requires a matched (b, grid) pair.  Returns 0 by convention when both
    sides sit in the trivial regime (m >= 0 and e = 0); a large defect means
    one solver is stuck in a worse local minimum.
    """
    if q.b != s.b:
        raise ValueError(f"mismatched b: quotient {q.b}, bulk {s.b}")
    if q.grid.shape != s.grid.shape or q.grid.bc != s.grid.bc:
        raise ValueError("quotient and bulk solutions live on different grids")
    if q.nonnegative and s.trivial:
        return 0.0
    if q.nonnegative != s.trivial:
        raise ValueError("sign-regime mismatch: one side trivial, the other not")
    return abs(q.m ** 2 / 2.0 + s.energy) / abs(s.energy)
