"""Discrete geometry of the magnetic square Q_R = (-R/2, R/2)^2.

Everything downstream lives on a uniform n x n lattice with spacing h = R/n
and gauge-covariant link phases (Peierls factors) for the symmetric-gauge
vector potential

    A0(x1, x2) = (1/2) * (-x2, x1),      curl A0 = 1.

Conventions
-----------
* Fields are complex arrays of shape (ny, nx) indexed u[j, i] with axis 1 the
  x1 direction; C-order flattening therefore runs x1 fastest (row-major).
* Dirichlet and Neumann grids carry n+1 nodes per side including the boundary;
  the magnetic-periodic grid carries n nodes per side (node n is node 0).
* A link phase on the edge from x to x + h*e_d is exp(-i * int_edge A0 . dl),
  evaluated in closed form (A0 is linear, so the integral is exact):
      x-edge at height x2:   exp(+i h x2 / 2)
      y-edge at abscissa x1: exp(-i h x1 / 2)
  The oriented plaquette product is exp(-i h^2) for every cell.
* Magnetic-periodic wrap: the quasi-periodicity compatible with A0 is
      u(x + R e1) = exp(+i R x2 / 2) u(x),
      u(x + R e2) = exp(-i R x1 / 2) u(x),
  single-valued around the corner exactly when R^2 = 2 pi N.  The wrap factors
  are folded into the seam links so downstream code never sees ghost nodes.
* Quadrature: plain Riemann weights h^2 on the periodic grid, tensor-product
  trapezoid weights on Dirichlet/Neumann grids (boundary nodes halved, corners
  quartered).  Grid stores (h, n) and derives R = h*n so the relation is exact
  in the stored representation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "DIRICHLET",
    "NEUMANN",
    "PERIODIC",
    "BoundaryCondition",
    "Grid",
    "LinkField",
    "build_grid",
    "build_links",
    "periodic_grid",
    "flux_from_side",
]

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
PERIODIC = "periodic"
_KINDS = (DIRICHLET, NEUMANN, PERIODIC)

MIN_POINTS = 16
FLUX_RTOL = 1e-12


class GridError(ValueError):
    """Raised for invalid grid / boundary-condition combinations."""


def flux_from_side(R: float) -> int:
    """Integer flux N with R^2 = 2 pi N, or raise if R is not flux-quantized."""
    ratio = R * R / (2.0 * np.pi)
    N = int(round(ratio))
    if N < 1 or abs(ratio - N) > FLUX_RTOL * max(1.0, ratio):
        raise GridError(
            f"side length R={R!r} is not flux-quantized: R^2/(2 pi) = {ratio!r} "
            "must be a positive integer for the magnetic-periodic condition"
        )
    return N


@dataclass(frozen=True)
class BoundaryCondition:
    """Closure of the square: dirichlet, neumann, or magnetic-periodic.

    For the periodic kind, ``flux`` is the integer N with R^2 = 2 pi N; it is
    validated against the grid side at construction of the Grid.
    """

    kind: str
    flux: int | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise GridError(f"unknown boundary condition kind {self.kind!r}")
        if self.kind == PERIODIC:
            if self.flux is None or self.flux < 1:
                raise GridError("magnetic-periodic closure needs integer flux N >= 1")
        elif self.flux is not None:
            raise GridError(f"{self.kind} closure carries no flux integer")

    @classmethod
    def dirichlet(cls) -> "BoundaryCondition":
        return cls(DIRICHLET)

    @classmethod
    def neumann(cls) -> "BoundaryCondition":
        return cls(NEUMANN)

    @classmethod
    def periodic(cls, flux: int) -> "BoundaryCondition":
        return cls(PERIODIC, flux=int(flux))

    @property
    def is_periodic(self) -> bool:
        return self.kind == PERIODIC


@dataclass(frozen=True)
class Grid:
    """Uniform discretization of Q_R.  Stores (h, n); R is derived as h*n."""

    bc: BoundaryCondition
    n: int          # intervals per side
    h: float        # lattice spacing

    def __post_init__(self):
        if self.n < MIN_POINTS:
            raise GridError(f"n={self.n} too small; need n >= {MIN_POINTS}")
        if self.h <= 0.0:
            raise GridError("spacing h must be positive")
        if self.bc.is_periodic:
            N = flux_from_side(self.R)
            if N != self.bc.flux:
                raise GridError(
                    f"grid side R={self.R!r} carries flux {N}, "
                    f"boundary condition declares {self.bc.flux}"
                )

    # -- geometry ----------------------------------------------------------

    @property
    def R(self) -> float:
        return self.h * self.n

    @property
    def nx(self) -> int:
        return self.n if self.bc.is_periodic else self.n + 1

    @property
    def ny(self) -> int:
        return self.nx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def num_nodes(self) -> int:
        return self.nx * self.ny

    @cached_property
    def x1(self) -> np.ndarray:
        return -0.5 * self.R + self.h * np.arange(self.nx)

    @cached_property
    def x2(self) -> np.ndarray:
        return -0.5 * self.R + self.h * np.arange(self.ny)

    # -- quadrature --------------------------------------------------------

    @cached_property
    def weights(self) -> np.ndarray:
        """Node quadrature weights, shape (ny, nx)."""
        if self.bc.is_periodic:
            return np.full(self.shape, self.h * self.h)
        t = np.ones(self.nx)
        t[0] = t[-1] = 0.5
        return self.h * self.h * np.outer(t, t)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        if not self.bc.is_periodic:
            m[0, :] = m[-1, :] = True
            m[:, 0] = m[:, -1] = True
        return m

    @cached_property
    def free_mask(self) -> np.ndarray:
        """Nodes carrying unknowns (excludes the Dirichlet boundary)."""
        if self.bc.kind == DIRICHLET:
            return ~self.boundary_mask
        return np.ones(self.shape, dtype=bool)

    # -- field helpers -----------------------------------------------------

    def check_field(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        if u.shape != self.shape:
            raise GridError(f"field shape {u.shape} does not match grid {self.shape}")
        return u

    def project(self, u: np.ndarray) -> np.ndarray:
        """Enforce the closure on a field (zero Dirichlet boundary nodes)."""
        u = self.check_field(u).astype(complex, copy=True)
        if self.bc.kind == DIRICHLET:
            u[self.boundary_mask] = 0.0
        return u

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=complex)

    def random_field(self, rng: np.random.Generator, smooth: bool = False,
                     kmax: float = 2.5) -> np.ndarray:
        """Unit-L2 random complex field respecting the closure.

        With smooth=True the field is low-passed to physical wavenumbers
        <= kmax (in units of the magnetic length), so its kinetic density
        stays O(1) and it makes a usable minimizer seed.
        """
        u = rng.normal(size=self.shape) + 1j * rng.normal(size=self.shape)
        if smooth:
            f = np.fft.fft2(u)
            k1 = 2 * np.pi * np.fft.fftfreq(self.nx) * self.nx / self.R
            k2 = 2 * np.pi * np.fft.fftfreq(self.ny) * self.ny / self.R
            f *= (np.abs(k1)[None, :] <= kmax) & (np.abs(k2)[:, None] <= kmax)
            u = np.fft.ifft2(f)
        u = self.project(u)
        nrm = np.sqrt(self.norms(u)[0])
        return u / nrm if nrm > 0 else u

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        """Weighted inner product sum_x w_x u conj(v)."""
        return complex(np.sum(self.weights * u * np.conj(v)))

    def norms(self, u: np.ndarray) -> tuple[float, float, float]:
        """(sum w |u|^2, sum w |u|^4, max |u|) with the grid's quadrature."""
        u = self.check_field(u)
        a2 = u.real * u.real + u.imag * u.imag
        w = self.weights
        l2_sq = float(np.sum(w * a2))
        l4_4 = float(np.sum(w * a2 * a2))
        sup = float(np.sqrt(a2.max())) if a2.size else 0.0
        return l2_sq, l4_4, sup


def build_grid(R: float, n: int, bc: BoundaryCondition) -> Grid:
    """Grid over Q_R with n intervals per side under the given closure.

    For the magnetic-periodic closure, R is snapped to sqrt(2 pi N) exactly so
    the wrap phases are single-valued.
    """
    if n < MIN_POINTS:
        raise GridError(f"n={n} too small; need n >= {MIN_POINTS}")
    if R <= 0:
        raise GridError("side length R must be positive")
    if bc.is_periodic:
        N = flux_from_side(R)
        if N != bc.flux:
            raise GridError(f"R={R!r} implies flux {N}, boundary condition has {bc.flux}")
        R = float(np.sqrt(2.0 * np.pi * N))
    return Grid(bc=bc, n=int(n), h=float(R) / int(n))


def periodic_grid(flux: int, n: int) -> Grid:
    """Magnetic-periodic grid with R = sqrt(2 pi N)."""
    return build_grid(float(np.sqrt(2.0 * np.pi * flux)), n, BoundaryCondition.periodic(flux))


def default_points(R: float, max_length: float = 0.125, multiple: int = 8) -> int:
    """Default n for a side R: h <= max_length (>= 8 nodes per magnetic length),
    rounded up to a multiple of `multiple`, never below MIN_POINTS."""
    n = int(np.ceil(R / max_length))
    n = max(MIN_POINTS, n)
    return int(multiple * np.ceil(n / multiple))


@dataclass(frozen=True)
class LinkField:
    """Unit-modulus gauge link phases on the directed edges of a grid.

    ux[j, i] sits on the edge from node (i, j) to (i+1, j); uy[j, i] on the
    edge from (i, j) to (i, j+1).  On the periodic grid both arrays are
    (n, n) and the seam columns absorb the magnetic-translation wrap phases;
    on bounded grids ux is (n+1, n) and uy is (n, n+1).
    """

    grid: Grid
    ux: np.ndarray
    uy: np.ndarray

    def plaquette_products(self) -> np.ndarray:
        """Oriented product of the four edge phases around every cell.

        Equals exp(-i h^2) uniformly (the cell flux of the unit field).
        """
        ux, uy = self.ux, self.uy
        if self.grid.bc.is_periodic:
            return (ux * np.roll(uy, -1, axis=1)
                    * np.conj(np.roll(ux, -1, axis=0)) * np.conj(uy))
        return ux[:-1, :] * uy[:, 1:] * np.conj(ux[1:, :]) * np.conj(uy[:, :-1])

    def gauge_transformed(self, chi: np.ndarray) -> "LinkField":
        """Links after u -> e^{i chi} u, A0 -> A0 + grad chi (test utility)."""
        g = self.grid
        chi = np.asarray(chi, dtype=float)
        if g.bc.is_periodic:
            dchi_x = np.roll(chi, -1, axis=1) - chi
            dchi_y = np.roll(chi, -1, axis=0) - chi
        else:
            dchi_x = chi[:, 1:] - chi[:, :-1]
            dchi_y = chi[1:, :] - chi[:-1, :]
        return LinkField(grid=g,
                         ux=self.ux * np.exp(-1j * dchi_x),
                         uy=self.uy * np.exp(-1j * dchi_y))


def build_links(g: Grid) -> LinkField:
    """Exact line-integral link phases for A0 on every directed edge."""
    h, R = g.h, g.R
    if g.bc.is_periodic:
        n = g.n
        X1 = np.broadcast_to(g.x1[None, :], (n, n)).copy()
        X2 = np.broadcast_to(g.x2[:, None], (n, n)).copy()
        ux = np.exp(1j * h * X2 / 2.0)
        uy = np.exp(-1j * h * X1 / 2.0)
        # seam links: fold in u(x+R e1) = exp(i R x2/2) u, u(x+R e2) = exp(-i R x1/2) u
        ux[:, -1] = ux[:, -1] * np.exp(1j * R * X2[:, -1] / 2.0)
        uy[-1, :] = uy[-1, :] * np.exp(-1j * R * X1[-1, :] / 2.0)
        return LinkField(grid=g, ux=ux, uy=uy)
    m = g.nx
    ux = np.exp(1j * h * g.x2[:, None] / 2.0) * np.ones((1, m - 1))
    uy = np.exp(-1j * h * g.x1[None, :] / 2.0) * np.ones((m - 1, 1))
    return LinkField(grid=g, ux=ux, uy=uy)
