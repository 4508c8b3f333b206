"""Staggered grids, field states, media and the weighted energy inner product.

Discrete layout (fixed here, used by every other module):

1D, interval [0, L], n cells of size h = L/n:
  * E lives at the n+1 cell edges x_i = i*h, including both boundary nodes.
  * H lives at the n cell centers x_{i+1/2} = (i+1/2)*h.
  * Quadrature weights: h per node, halved at the two boundary E nodes
    (trapezoid on edges, midpoint on centers), so both node classes
    integrate constants exactly over [0, L].

2D TM mode, rectangle [0,Lx] x [0,Ly], nx x ny cells:
  * Ez at the (nx+1)(ny+1) vertices; every boundary vertex is a PEC node.
  * Hx at vertical-edge midpoints (i, j+1/2) -> (nx+1)*ny nodes.
  * Hy at horizontal-edge midpoints (i+1/2, j) -> nx*(ny+1) nodes.
  * Weights are tensor products of the 1D rules (trapezoid along vertex
    axes, midpoint along center axes).

A ``FieldState`` stores one flat, immutable float64 vector holding the E
block followed by the H block(s); the grid knows the slices and shapes.
The weighted inner product sums eps*Eu*Ev + mu*Hu*Hv times the node
weights, which is the discrete electromagnetic energy when u == v.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, NonFiniteFieldError


def _axis_weights(n_cells: int, h: float, staggered: bool) -> np.ndarray:
    """Quadrature weights along one axis (trapezoid on edges, h on centers)."""
    if staggered:
        return np.full(n_cells, h)
    w = np.full(n_cells + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


class Grid:
    """Base class for the staggered grids; see the module docstring for layouts."""

    dimension: int

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.cells_per_axis == other.cells_per_axis
            and self.domain_lengths == other.domain_lengths
        )

    def __hash__(self):
        return hash((type(self).__name__, self.cells_per_axis, self.domain_lengths))

    def check_state(self, u: "FieldState") -> None:
        if u.grid != self:
            raise GridMismatchError("field state does not live on this grid")

    def zero_boundary_e(self, values: np.ndarray) -> None:
        """Zero the PEC (boundary E) entries of a flat vector, in place."""
        values[self.boundary_e_indices] = 0.0


class Grid1D(Grid):
    dimension = 1

    def __init__(self, num_cells: int, length: float = 1.0):
        if num_cells < 2:
            raise ValueError("need at least 2 cells per axis")
        if length <= 0:
            raise ValueError("domain length must be positive")
        self.num_cells = int(num_cells)
        self.length = float(length)
        self.h = self.length / self.num_cells

        self.num_e = self.num_cells + 1
        self.num_h = self.num_cells
        self.num_unknowns = self.num_e + self.num_h
        self.e_slice = slice(0, self.num_e)
        self.h_slice = slice(self.num_e, self.num_unknowns)

        self.e_coords = np.linspace(0.0, self.length, self.num_e)
        self.h_coords = (np.arange(self.num_h) + 0.5) * self.h
        self.e_weights = _axis_weights(self.num_cells, self.h, staggered=False)
        self.h_weights = _axis_weights(self.num_cells, self.h, staggered=True)

        self.boundary_e_indices = np.array([0, self.num_e - 1])

    @property
    def cells_per_axis(self):
        return (self.num_cells,)

    @property
    def domain_lengths(self):
        return (self.length,)

    def interp_e_to_h(self, e: np.ndarray) -> np.ndarray:
        """Two-point average of edge values onto cell centers."""
        return 0.5 * (e[:-1] + e[1:])

    def interp_h_to_e(self, h: np.ndarray) -> np.ndarray:
        """Average center values onto edges; single-neighbor copy at the ends."""
        out = np.empty(self.num_e)
        out[1:-1] = 0.5 * (h[:-1] + h[1:])
        out[0] = h[0]
        out[-1] = h[-1]
        return out


class GridTM2D(Grid):
    dimension = 2

    def __init__(self, num_cells: tuple[int, int], lengths: tuple[float, float] = (1.0, 1.0)):
        nx, ny = (int(c) for c in num_cells)
        lx, ly = (float(l) for l in lengths)
        if nx < 2 or ny < 2:
            raise ValueError("need at least 2 cells per axis")
        if lx <= 0 or ly <= 0:
            raise ValueError("domain lengths must be positive")
        self.nx, self.ny = nx, ny
        self.lx, self.ly = lx, ly
        self.hx, self.hy = lx / nx, ly / ny

        self.shape_e = (nx + 1, ny + 1)
        self.shape_hx = (nx + 1, ny)
        self.shape_hy = (nx, ny + 1)
        self.num_e = (nx + 1) * (ny + 1)
        self.num_hx = (nx + 1) * ny
        self.num_hy = nx * (ny + 1)
        self.num_h = self.num_hx + self.num_hy
        self.num_unknowns = self.num_e + self.num_h
        self.e_slice = slice(0, self.num_e)
        self.h_slice = slice(self.num_e, self.num_unknowns)
        self.hx_slice = slice(self.num_e, self.num_e + self.num_hx)
        self.hy_slice = slice(self.num_e + self.num_hx, self.num_unknowns)

        xv = np.linspace(0.0, lx, nx + 1)
        yv = np.linspace(0.0, ly, ny + 1)
        xc = (np.arange(nx) + 0.5) * self.hx
        yc = (np.arange(ny) + 0.5) * self.hy
        self.e_coords = _tensor_coords(xv, yv)
        self.hx_coords = _tensor_coords(xv, yc)
        self.hy_coords = _tensor_coords(xc, yv)
        self.h_coords = np.vstack([self.hx_coords, self.hy_coords])

        wxv = _axis_weights(nx, self.hx, staggered=False)
        wyv = _axis_weights(ny, self.hy, staggered=False)
        self.e_weights = np.outer(wxv, wyv).ravel()
        self.hx_weights = np.outer(wxv, np.full(ny, self.hy)).ravel()
        self.hy_weights = np.outer(np.full(nx, self.hx), wyv).ravel()
        self.h_weights = np.concatenate([self.hx_weights, self.hy_weights])

        mask = np.zeros(self.shape_e, dtype=bool)
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
        self.boundary_e_indices = np.flatnonzero(mask.ravel())

    @property
    def cells_per_axis(self):
        return (self.nx, self.ny)

    @property
    def domain_lengths(self):
        return (self.lx, self.ly)

    def interp_e_to_hx(self, e2d: np.ndarray) -> np.ndarray:
        return 0.5 * (e2d[:, :-1] + e2d[:, 1:])

    def interp_e_to_hy(self, e2d: np.ndarray) -> np.ndarray:
        return 0.5 * (e2d[:-1, :] + e2d[1:, :])

    def interp_h_to_e(self, hx2d: np.ndarray, hy2d: np.ndarray) -> np.ndarray:
        """Mean of the adjacent Hx/Hy neighbors at each vertex (2-4 of them)."""
        acc = np.zeros(self.shape_e)
        cnt = np.zeros(self.shape_e)
        acc[:, 1:] += hx2d
        cnt[:, 1:] += 1.0
        acc[:, :-1] += hx2d
        cnt[:, :-1] += 1.0
        acc[1:, :] += hy2d
        cnt[1:, :] += 1.0
        acc[:-1, :] += hy2d
        cnt[:-1, :] += 1.0
        return acc / cnt


def _tensor_coords(ax: np.ndarray, ay: np.ndarray) -> np.ndarray:
    gx, gy = np.meshgrid(ax, ay, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, horizon] into num_steps steps of size tau."""

    horizon: float
    num_steps: int

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.num_steps < 1:
            raise ValueError("need at least one step")

    @property
    def tau(self) -> float:
        return self.horizon / self.num_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.num_steps + 1)


class MediumCoefficients:
    """Per-node permittivity/permeability with a declared uniform lower bound.

    ``epsilon`` is sampled at E nodes, ``mu`` at H nodes (Hx then Hy in 2D);
    both must stay >= delta > 0.  The combined ``energy_weights`` vector
    (quadrature weight times coefficient, in flat-state order) is what the
    inner product contracts against.
    """

    def __init__(self, grid: Grid, epsilon, mu, delta: float | None = None):
        self.grid = grid
        eps = np.broadcast_to(np.asarray(epsilon, dtype=float), (grid.num_e,)).copy()
        mu_arr = np.broadcast_to(np.asarray(mu, dtype=float), (grid.num_h,)).copy()
        if delta is None:
            delta = min(eps.min(), mu_arr.min())
        delta = float(delta)
        if not (delta > 0):
            raise ValueError("delta must be positive")
        if eps.min() < delta or mu_arr.min() < delta:
            raise ValueError("epsilon and mu must be bounded below by delta")
        self.epsilon = eps
        self.mu = mu_arr
        self.delta = delta
        self.energy_weights = np.concatenate(
            [grid.e_weights * eps, grid.h_weights * mu_arr]
        )
        self.plain_weights = np.concatenate([grid.e_weights, grid.h_weights])
        self.inv_epsilon = 1.0 / eps
        self.inv_mu = 1.0 / mu_arr
        for arr in (self.epsilon, self.mu, self.energy_weights, self.plain_weights,
                    self.inv_epsilon, self.inv_mu):
            arr.flags.writeable = False

    def check_grid(self, grid: Grid) -> None:
        if self.grid != grid:
            raise GridMismatchError("medium coefficients built for a different grid")


class FieldState:
    """Immutable (E, H) sample on a staggered grid, stored as one flat vector."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values: np.ndarray, *, _checked: bool = False):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.num_unknowns,):
            raise GridMismatchError(
                f"state length {values.shape} does not match grid "
                f"({grid.num_unknowns} unknowns)"
            )
        if not _checked and not np.isfinite(values).all():
            raise NonFiniteFieldError("field state contains NaN/Inf entries")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("FieldState is immutable")

    @classmethod
    def zeros(cls, grid: Grid) -> "FieldState":
        return cls(grid, np.zeros(grid.num_unknowns), _checked=True)

    @classmethod
    def from_components(cls, grid: Grid, e, h) -> "FieldState":
        vals = np.empty(grid.num_unknowns)
        vals[grid.e_slice] = np.asarray(e, dtype=float).ravel()
        vals[grid.h_slice] = np.asarray(h, dtype=float).ravel()
        return cls(grid, vals)

    @property
    def e_field(self) -> np.ndarray:
        e = self.values[self.grid.e_slice]
        if self.grid.dimension == 2:
            return e.reshape(self.grid.shape_e)
        return e

    @property
    def h_field(self) -> np.ndarray:
        return self.values[self.grid.h_slice]


def inner_product(u: FieldState, v: FieldState, med: MediumCoefficients) -> float:
    """Weighted inner product <u, v>_H = sum(eps*Eu*Ev + mu*Hu*Hv) * node weight."""
    if u.grid != v.grid:
        raise GridMismatchError("states live on different grids")
    med.check_grid(u.grid)
    return float(np.dot(med.energy_weights, u.values * v.values))


def energy(u: FieldState, med: MediumCoefficients) -> float:
    """Electromagnetic energy ||u||_H^2 = <u, u>_H (nonnegative, 0 iff u == 0)."""
    med.check_grid(u.grid)
    return float(np.dot(med.energy_weights, u.values * u.values))


def h_norm(u: FieldState, med: MediumCoefficients) -> float:
    return float(np.sqrt(max(energy(u, med), 0.0)))


def l2_norm_sq(u: FieldState, grid: Grid) -> float:
    """Unweighted discrete L2 norm squared (same quadrature, unit coefficients)."""
    grid.check_state(u)
    w = np.concatenate([grid.e_weights, grid.h_weights])
    return float(np.dot(w, u.values * u.values))


def sine_state(grid: Grid, amplitude: float = 1.0, wavenumber: int = 1) -> FieldState:
    """Smooth PEC-compatible reference state used as the default initial
    condition: E = a sin(k pi x / L) (zero on the boundary), H = a cos(...)
    in 1D; in 2D a sine-sine Ez bubble with H = 0."""
    a, k = float(amplitude), int(wavenumber)
    vals = np.zeros(grid.num_unknowns)
    if isinstance(grid, Grid1D):
        vals[grid.e_slice] = a * np.sin(k * np.pi * grid.e_coords / grid.length)
        vals[grid.h_slice] = a * np.cos(k * np.pi * grid.h_coords / grid.length)
    elif isinstance(grid, GridTM2D):
        xe, ye = grid.e_coords[:, 0], grid.e_coords[:, 1]
        vals[grid.e_slice] = (a * np.sin(k * np.pi * xe / grid.lx)
                              * np.sin(k * np.pi * ye / grid.ly))
    else:
        raise TypeError(f"unsupported grid type {type(grid)!r}")
    grid.zero_boundary_e(vals)
    return FieldState(grid, vals, _checked=True)


def smooth_random_state(grid: Grid, rng: np.random.Generator,
                        num_modes: int = 8, decay: float = 3.0,
                        amplitude: float = 1.0) -> FieldState:
    """Random field with spectrally decaying coefficients: the discrete stand-in
    for "a random element of D(M)" whose graph norm is grid-resolved (plain
    white noise would put most of its D(M) norm into the top of the discrete
    spectrum and spoil small-t semigroup probes)."""
    vals = np.zeros(grid.num_unknowns)
    weights = (np.arange(1, num_modes + 1, dtype=float)) ** (-float(decay))
    if isinstance(grid, Grid1D):
        ce = rng.standard_normal(num_modes) * weights
        ch = rng.standard_normal(num_modes) * weights
        for j in range(1, num_modes + 1):
            vals[grid.e_slice] += ce[j - 1] * np.sin(j * np.pi * grid.e_coords / grid.length)
            vals[grid.h_slice] += ch[j - 1] * np.cos(j * np.pi * grid.h_coords / grid.length)
    elif isinstance(grid, GridTM2D):
        ce = rng.standard_normal(num_modes) * weights
        cx = rng.standard_normal(num_modes) * weights
        cy = rng.standard_normal(num_modes) * weights
        xe, ye = grid.e_coords[:, 0], grid.e_coords[:, 1]
        xhx, yhx = grid.hx_coords[:, 0], grid.hx_coords[:, 1]
        xhy, yhy = grid.hy_coords[:, 0], grid.hy_coords[:, 1]
        for j in range(1, num_modes + 1):
            vals[grid.e_slice] += ce[j - 1] * (np.sin(j * np.pi * xe / grid.lx)
                                               * np.sin(j * np.pi * ye / grid.ly))
            vals[grid.hx_slice] += cx[j - 1] * (np.cos(j * np.pi * xhx / grid.lx)
                                                * np.cos(j * np.pi * yhx / grid.ly))
            vals[grid.hy_slice] += cy[j - 1] * (np.cos(j * np.pi * xhy / grid.lx)
                                                * np.cos(j * np.pi * yhy / grid.ly))
    else:
        raise TypeError(f"unsupported grid type {type(grid)!r}")
    vals *= float(amplitude)
    grid.zero_boundary_e(vals)
    return FieldState(grid, vals, _checked=True)
