"""Semi-implicit Euler / theta-method time stepping with Picard drift solves.

One step of the family implemented here reads

    u^{n+1} = u^n + tau*[theta*M u^{n+1} + (1-theta)*M u^n]
                  + tau*[theta*F(t_{n+1}, u^{n+1}) + (1-theta)*F(t_n, u^n)]
                  + B(t_n, u^n) DeltaW^{n+1},

theta = 1 being the semi-implicit Euler scheme (implicit in M and the
drift, always explicit in the diffusion) and theta = 1/2 the
energy-conserving midpoint variant.  The implicit part is solved by Picard
iteration around the reusable (I - theta*tau*M) factorization:

    v_{m+1} = (I - theta*tau*M)^{-1} (rhs0 + theta*tau*F(t_{n+1}, v_m)),

stopped when ||v_{m+1} - v_m||_H <= picard_tol * max(1, ||v_m||_H).  Global
Lipschitz drift and tau*theta*C_F < 1 make this a contraction; the
precondition is checked once per run and violations warn but do not abort.
A step that exhausts picard_max_iters raises StepError (no step-size
rescue: convergence ladders need the fixed tau).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteFieldError, StepError
from .fields import FieldState, MediumCoefficients, TimeGrid, inner_product
from .models import NemytskijDiffusion, NemytskijDrift
from .noise import WienerPath
from .operators import MaxwellOperator, ShiftedSolver

# Full-state storage is capped at this many floats; longer runs store strided.
STORAGE_BUDGET = 10**7


@dataclass(frozen=True)
class SchemeConfig:
    theta: float = 1.0
    picard_tol: float = 1e-10
    picard_max_iters: int = 50

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.picard_tol <= 0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max_iters < 1:
            raise ValueError("picard_max_iters must be at least 1")


@dataclass
class Trajectory:
    """States stored along one integration (always including t_0 and t_N)."""

    grid: object
    time_grid: TimeGrid
    states: list
    stored_indices: np.ndarray
    picard_iters: np.ndarray
    picard_residuals: np.ndarray
    sample_index: int | None = None

    @property
    def state_times(self) -> np.ndarray:
        return self.stored_indices * self.time_grid.tau

    @property
    def final_state(self) -> FieldState:
        return self.states[-1]


class StepKernel:
    """Everything one step needs, precomputed once per (grid, tau, theta) run."""

    def __init__(self, cfg: SchemeConfig, op: MaxwellOperator,
                 drift: NemytskijDrift | None, diff: NemytskijDiffusion | None,
                 tau: float):
        self.cfg = cfg
        self.op = op
        self.drift = drift
        self.diff = diff
        self.tau = float(tau)
        self.theta = cfg.theta
        self.solver = ShiftedSolver(op, self.theta * self.tau)
        self._weights = op.med.energy_weights
        if drift is not None and drift.model.lipschitz_L > 0:
            # Drift Lipschitz constant in the H norm; the sqrt(2) collects the
            # two-argument pointwise bound, delta the coefficient weighting.
            c_f = np.sqrt(2.0) * drift.model.lipschitz_L / op.med.delta
            if self.tau * c_f >= 1.0:
                warnings.warn(
                    f"Picard contraction precondition violated: tau*C_F = "
                    f"{self.tau * c_f:.3g} >= 1 (tau={self.tau:.3g}, C_F~{c_f:.3g})",
                    RuntimeWarning, stacklevel=2,
                )

    def _norm(self, values: np.ndarray) -> float:
        return float(np.sqrt(np.dot(self._weights, values * values)))

    def step_raw(self, values: np.ndarray, t_n: float,
                 dw_nodes: np.ndarray | None):
        """Advance one step; returns (new_values, picard_iters, last_residual)."""
        tau, theta = self.tau, self.theta
        rhs = values.copy()
        if theta < 1.0:
            rhs += (tau * (1.0 - theta)) * self.op.apply_raw(values)
            if self.drift is not None:
                rhs += (tau * (1.0 - theta)) * self.drift.eval_raw(t_n, values)
        if dw_nodes is not None and self.diff is not None:
            rhs += self.diff.apply_raw(t_n, values, dw_nodes)

        if theta == 0.0:
            new_vals, iters, residual = rhs, 0, 0.0
        elif self.drift is None:
            new_vals, iters, residual = self.solver.solve_raw(rhs), 1, 0.0
        else:
            t_next = t_n + tau
            v = values
            iters = 0
            residual = np.inf
            while iters < self.cfg.picard_max_iters:
                v_new = self.solver.solve_raw(
                    rhs + (tau * theta) * self.drift.eval_raw(t_next, v)
                )
                iters += 1
                residual = self._norm(v_new - v)
                tol_scale = max(1.0, self._norm(v))
                v = v_new
                if residual <= self.cfg.picard_tol * tol_scale:
                    break
            else:
                raise StepError(
                    f"Picard iteration did not converge in "
                    f"{self.cfg.picard_max_iters} iterations "
                    f"(last residual {residual:.3e})",
                    residual=residual,
                )
            new_vals = v
        if not np.isfinite(new_vals).all():
            raise NonFiniteFieldError("time step produced NaN/Inf")
        return new_vals, iters, residual


def step(u_n: FieldState, t_n: float, cfg: SchemeConfig, op: MaxwellOperator,
         drift: NemytskijDrift | None = None,
         diff: NemytskijDiffusion | None = None,
         dw_nodes: np.ndarray | None = None,
         tau: float | None = None) -> FieldState:
    """Single step convenience wrapper around :class:`StepKernel`."""
    if tau is None:
        raise ValueError("tau is required")
    op.grid.check_state(u_n)
    kernel = StepKernel(cfg, op, drift, diff, tau)
    new_vals, _, _ = kernel.step_raw(u_n.values, t_n, dw_nodes)
    return FieldState(op.grid, new_vals, _checked=True)


def _auto_stride(num_steps: int, num_unknowns: int) -> int:
    total = (num_steps + 1) * num_unknowns
    if total <= STORAGE_BUDGET:
        return 1
    return int(np.ceil(total / STORAGE_BUDGET))


def integrate(u0: FieldState, time_grid: TimeGrid, cfg: SchemeConfig,
              op: MaxwellOperator, drift: NemytskijDrift | None = None,
              diff: NemytskijDiffusion | None = None,
              path: WienerPath | None = None,
              store_stride: int | None = None,
              sample_index: int | None = None,
              t_start: float = 0.0) -> Trajectory:
    """Iterate the scheme over the whole time grid, consuming path increments
    in step order (the diffusion only ever sees increments up to the current
    step, which is the adaptedness built into the scheme).  ``t_start`` shifts
    the absolute times handed to the coefficients (used when a run continues
    from a frozen intermediate state)."""
    op.grid.check_state(u0)
    if diff is not None:
        if path is None:
            raise ValueError("diffusion present but no noise path supplied")
        if path.time_grid != time_grid:
            raise ValueError(
                "path resolution differs from the integration grid; coarsen the "
                "path to the integration step size first"
            )
        if path.spec.grid != op.grid:
            raise ValueError("noise basis sampled on a different grid")

    n_steps = time_grid.num_steps
    stride = store_stride if store_stride else _auto_stride(n_steps, op.grid.num_unknowns)
    tau = time_grid.tau
    kernel = StepKernel(cfg, op, drift, diff, tau)

    states = [u0]
    stored = [0]
    iters = np.zeros(n_steps, dtype=np.int64)
    residuals = np.zeros(n_steps)
    values = u0.values
    for n in range(n_steps):
        dw = path.increment_field(n) if diff is not None else None
        try:
            values, iters[n], residuals[n] = kernel.step_raw(values, t_start + n * tau, dw)
        except StepError as exc:
            raise StepError(f"step {n} failed: {exc}", step_index=n,
                            residual=exc.residual) from exc
        if (n + 1) % stride == 0 or n + 1 == n_steps:
            states.append(FieldState(op.grid, values, _checked=True))
            stored.append(n + 1)
    return Trajectory(op.grid, time_grid, states, np.asarray(stored), iters,
                      residuals, sample_index)


def energy_identity_defect(u_n: FieldState, u_np1: FieldState, t_n: float,
                           tau: float, theta: float, op: MaxwellOperator,
                           drift: NemytskijDrift | None,
                           b_dw: FieldState | None) -> float:
    """Defect of the tested-with-u^{n+1} energy identity of one recorded step.

    Both sides of

        1/2 (||u^{n+1}||^2 - ||u^n||^2) + 1/2 ||u^{n+1} - u^n||^2
          = tau*theta*<F(t_{n+1}, u^{n+1}), u^{n+1}>
            + (1-theta)*tau*<M u^n + F(t_n, u^n), u^{n+1}>
            + <B DeltaW, u^{n+1}>

    are evaluated; the return value is LHS - RHS, which is zero up to the
    Picard/solve residual (the implicit M term drops by skew-adjointness).
    """
    med = op.med
    du = FieldState(op.grid, u_np1.values - u_n.values, _checked=True)
    lhs = 0.5 * (inner_product(u_np1, u_np1, med) - inner_product(u_n, u_n, med))
    lhs += 0.5 * inner_product(du, du, med)

    rhs = 0.0
    if drift is not None:
        f_next = drift.eval(t_n + tau, u_np1)
        rhs += tau * theta * inner_product(f_next, u_np1, med)
    if theta < 1.0:
        explicit = op.apply(u_n).values.copy()
        if drift is not None:
            explicit += drift.eval_raw(t_n, u_n.values)
        rhs += (1.0 - theta) * tau * inner_product(
            FieldState(op.grid, explicit, _checked=True), u_np1, med
        )
    if b_dw is not None:
        rhs += inner_product(b_dw, u_np1, med)
    return float(lhs - rhs)
