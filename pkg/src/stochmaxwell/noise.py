"""Truncated Karhunen-Loeve Q-Wiener noise: basis, sampling, coarsening.

The covariance is diagonal in the Dirichlet sine basis of L2(D) with
eigenvalues q_j = j^-s (j is the 1-based mode rank; in 2D the tensor modes
are ranked by increasing |j|^2).  Increment tables are drawn columnwise
from numpy's counter-based Philox generator, keyed per
(master_seed, sample_index, extra context..., mode_index) through
SeedSequence, with the step index as the in-stream counter position:
every single draw is a pure function of those indices, so sampling is
order-independent and safe to parallelize.

Coarsening contract: a coarse increment is the sum of its block of fine
increments combined by adjacent pairing in ascending step order (powers of
two first, then one sequential pass for an odd residual factor).  With this
fixed order, dyadic refinement chains aggregate bit-exactly:
``p.coarsen(2).coarsen(2)`` equals ``p.coarsen(4)`` to the last bit, which
is what the common-random-number convergence ladders rely on.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import CapabilityError
from .fields import Grid, Grid1D, GridTM2D, TimeGrid


def _mode_numbers_1d(grid: Grid1D, num_modes: int) -> list[int]:
    max_modes = grid.num_cells - 1
    if num_modes > max_modes:
        raise CapabilityError(
            f"{num_modes} modes requested; a {grid.num_cells}-cell grid resolves "
            f"at most {max_modes} orthonormal sine modes"
        )
    return list(range(1, num_modes + 1))


def _mode_numbers_2d(grid: GridTM2D, num_modes: int) -> list[tuple[int, int]]:
    max_modes = (grid.nx - 1) * (grid.ny - 1)
    if num_modes > max_modes:
        raise CapabilityError(
            f"{num_modes} modes requested; grid resolves at most {max_modes}"
        )
    pairs = [(jx, jy) for jx in range(1, grid.nx) for jy in range(1, grid.ny)]
    pairs.sort(key=lambda p: (p[0] ** 2 + p[1] ** 2, p[0], p[1]))
    return pairs[:num_modes]


def _sine_1d(j: int, length: float, x: np.ndarray) -> np.ndarray:
    return np.sqrt(2.0 / length) * np.sin(j * np.pi * x / length)


class NoiseSpec:
    """Truncated KL description of Q: modes, eigenvalues, sampled basis."""

    def __init__(self, grid: Grid, num_modes: int, decay_exponent: float):
        if num_modes < 1:
            raise ValueError("need at least one mode")
        if decay_exponent < 0:
            raise ValueError("decay exponent must be nonnegative")
        self.grid = grid
        self.num_modes = int(num_modes)
        self.decay_exponent = float(decay_exponent)
        self.eigenvalues = np.arange(1, num_modes + 1, dtype=float) ** (-self.decay_exponent)
        # q_j = j^-s is strictly decreasing for s > 0; s = 0 is allowed but
        # flagged: the continuum covariance would not be trace class.
        self.trace_class_in_limit = self.decay_exponent > 1.0

        if isinstance(grid, Grid1D):
            self.mode_numbers = _mode_numbers_1d(grid, num_modes)
            cols = [
                np.concatenate(
                    [_sine_1d(j, grid.length, grid.e_coords),
                     _sine_1d(j, grid.length, grid.h_coords)]
                )
                for j in self.mode_numbers
            ]
        elif isinstance(grid, GridTM2D):
            self.mode_numbers = _mode_numbers_2d(grid, num_modes)
            cols = []
            for jx, jy in self.mode_numbers:
                parts = []
                for coords in (grid.e_coords, grid.hx_coords, grid.hy_coords):
                    parts.append(
                        _sine_1d(jx, grid.lx, coords[:, 0])
                        * _sine_1d(jy, grid.ly, coords[:, 1])
                    )
                cols.append(np.concatenate(parts))
        else:
            raise TypeError(f"unsupported grid type {type(grid)!r}")

        self.basis_nodes = np.column_stack(cols)
        self.scaled_basis = self.basis_nodes * np.sqrt(self.eigenvalues)
        self.basis_nodes.flags.writeable = False
        self.scaled_basis.flags.writeable = False

    def hs_norm(self, sobolev_order: int) -> float:
        """Hilbert-Schmidt surrogate (sum_j q_j ||e_j||_{H^m}^2)^(1/2), analytic.

        For sine modes every derivative has unit L2 profile times its
        frequency power, so ||e_j||_{H^m}^2 = sum over derivative
        multi-orders of the squared frequencies.
        """
        m = int(sobolev_order)
        if m < 0:
            raise ValueError("sobolev order must be a nonnegative integer")
        total = 0.0
        for q, mode in zip(self.eigenvalues, self.mode_numbers):
            total += q * self._mode_sobolev_sq(mode, m)
        return float(np.sqrt(total))

    def _mode_sobolev_sq(self, mode, m: int) -> float:
        if self.grid.dimension == 1:
            freq_sq = (mode * np.pi / self.grid.length) ** 2
            return float(sum(freq_sq**l for l in range(m + 1)))
        jx, jy = mode
        fx = (jx * np.pi / self.grid.lx) ** 2
        fy = (jy * np.pi / self.grid.ly) ** 2
        return float(
            sum(fx**l1 * fy**l2 for l1 in range(m + 1) for l2 in range(m + 1 - l1))
        )

    def hs_tail_converges(self, sobolev_order: int) -> bool:
        """Would sum_j q_j ||e_j||_{H^m}^2 stay finite as J -> infinity?

        Mode frequencies grow like the rank in 1D and like sqrt(rank) in 2D,
        so the tail converges iff s > 2m + 1 (1D) or s > m + 1 (2D).
        """
        m = int(sobolev_order)
        if self.grid.dimension == 1:
            return self.decay_exponent > 2 * m + 1
        return self.decay_exponent > m + 1

    def orthonormality_defect(self) -> float:
        """max |<e_i, e_j>_{L2} - delta_ij| under the E-node quadrature."""
        e_block = self.basis_nodes[self.grid.e_slice]
        gram = e_block.T @ (self.grid.e_weights[:, None] * e_block)
        return float(np.abs(gram - np.eye(self.num_modes)).max())

    def increment_field_from_coeffs(self, dbeta: np.ndarray) -> np.ndarray:
        """sum_j sqrt(q_j) dbeta_j e_j(x) at every grid node (flat layout)."""
        return self.scaled_basis @ dbeta


def build_basis(grid: Grid, num_modes: int, decay_exponent: float) -> NoiseSpec:
    return NoiseSpec(grid, num_modes, decay_exponent)


def hs_norm(spec: NoiseSpec, sobolev_order: int) -> float:
    return spec.hs_norm(sobolev_order)


def _mode_generator(master_seed: int, sample_index: int, context: tuple, mode: int):
    entropy = (int(master_seed), int(sample_index), *map(int, context), int(mode))
    seq = np.random.SeedSequence(entropy)
    return np.random.Generator(np.random.Philox(seq))


class WienerPath:
    """Realized increment table Delta beta_j over a uniform time grid.

    ``increments[n, j]`` is the Brownian increment of mode j over fine step
    n; each column is i.i.d. Normal(0, tau).  Regeneration from the same
    (seed, sample_index, context) is bit-identical.
    """

    def __init__(self, spec: NoiseSpec, time_grid: TimeGrid, increments: np.ndarray,
                 seed: int, sample_index: int = 0, context: tuple = ()):
        increments = np.asarray(increments, dtype=float)
        if increments.shape != (time_grid.num_steps, spec.num_modes):
            raise ValueError("increment table shape does not match grid/spec")
        self.spec = spec
        self.time_grid = time_grid
        self.increments = increments
        self.increments.flags.writeable = False
        self.seed = int(seed)
        self.sample_index = int(sample_index)
        self.context = tuple(context)

    def increment_field(self, n: int) -> np.ndarray:
        """Node-sampled increment DeltaW^{n+1}(x) = sum_j sqrt(q_j) dbeta_j e_j(x)."""
        if not 0 <= n < self.time_grid.num_steps:
            raise IndexError(f"step index {n} out of range")
        return self.spec.scaled_basis @ self.increments[n]

    def coarsen(self, factor: int) -> "WienerPath":
        """Aggregate to step size factor*tau; see the module docstring for the
        fixed (adjacent-pairing, dyadic-chain-exact) summation order."""
        factor = int(factor)
        n = self.time_grid.num_steps
        if factor < 1 or n % factor != 0:
            raise ValueError(f"factor {factor} does not divide {n} steps")
        if factor == 1:
            return self
        table = self.increments
        remaining = factor
        while remaining % 2 == 0:
            half = table.reshape(table.shape[0] // 2, 2, self.spec.num_modes)
            table = half[:, 0, :] + half[:, 1, :]
            remaining //= 2
        if remaining > 1:
            blocks = table.reshape(table.shape[0] // remaining, remaining,
                                   self.spec.num_modes)
            acc = blocks[:, 0, :].copy()
            for i in range(1, remaining):
                acc += blocks[:, i, :]
            table = acc
        coarse_grid = TimeGrid(self.time_grid.horizon, n // factor)
        return WienerPath(self.spec, coarse_grid, table, self.seed,
                          self.sample_index, self.context)


def sample_path(spec: NoiseSpec, time_grid: TimeGrid, master_seed: int,
                sample_index: int = 0, context: tuple = ()) -> WienerPath:
    """Draw the full increment table at the finest resolution.

    Columns are generated independently (one keyed Philox stream per mode),
    so any subset can be regenerated without touching the others.
    """
    n = time_grid.num_steps
    sqrt_tau = np.sqrt(time_grid.tau)
    table = np.empty((n, spec.num_modes))
    for j in range(spec.num_modes):
        gen = _mode_generator(master_seed, sample_index, context, j)
        table[:, j] = gen.standard_normal(n) * sqrt_tau
    return WienerPath(spec, time_grid, table, master_seed, sample_index, context)


def coarsen_path(path: WienerPath, factor: int) -> WienerPath:
    return path.coarsen(factor)


def increment_field(path: WienerPath, n: int) -> np.ndarray:
    return path.increment_field(n)


_HEADER = struct.Struct("<QQQ")


def dump_increments(path: WienerPath, fileobj) -> None:
    """Binary audit dump: little-endian header (J, N, seed as uint64) followed
    by the row-major increment table as float64."""
    n, j = path.increments.shape
    fileobj.write(_HEADER.pack(j, n, path.seed))
    fileobj.write(np.ascontiguousarray(path.increments, dtype="<f8").tobytes())


def load_increments(fileobj):
    """Read a dump back; returns (num_modes, num_steps, seed, table)."""
    j, n, seed = _HEADER.unpack(fileobj.read(_HEADER.size))
    table = np.frombuffer(fileobj.read(n * j * 8), dtype="<f8").reshape(n, j).copy()
    return j, n, seed, table
