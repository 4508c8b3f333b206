"""Monte Carlo experiment harness: convergence ladders, energy traces,
Hölder and truncation-error probes, moment stability sweeps.

All studies follow the common-random-number discipline: one finest-level
noise path per sample index, aggregated exactly (noise.coarsen) to every
coarser step size, so error ladders compare schemes on the same
randomness.  Samples are independent work units; with ``workers > 1`` they
fan out to a process pool and results are reduced in fixed sample order,
so every report is bit-identical regardless of the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .fields import (
    FieldState,
    Grid1D,
    GridTM2D,
    MediumCoefficients,
    TimeGrid,
    energy,
    sine_state,
)
from .integrator import SchemeConfig, Trajectory, integrate
from .models import NemytskijDiffusion, NemytskijDrift, make_model
from .noise import build_basis, sample_path
from .operators import MaxwellOperator, graph_norm

# Context tag separating inner-ensemble noise streams from outer paths.
_INNER_TAG = 0x1D


@dataclass(frozen=True)
class StudySetup:
    """Picklable description of one experimental system; workers rebuild the
    live objects from this via :meth:`build`."""

    dimension: int = 1
    cells: tuple = (64,)
    lengths: tuple = (1.0,)
    epsilon: object = 1.0
    mu: object = 1.0
    delta: float | None = None
    model_name: str = "tanh-saturable"
    model_params: dict = field(default_factory=dict)
    num_modes: int = 16
    decay_exponent: float = 6.0
    theta: float = 1.0
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    horizon: float = 1.0
    fine_steps: int = 4096
    init_amplitude: float = 1.0
    init_wavenumber: int = 1
    master_seed: int = 1

    def build(self) -> "Context":
        if self.dimension == 1:
            grid = Grid1D(self.cells[0], self.lengths[0])
        else:
            grid = GridTM2D(tuple(self.cells), tuple(self.lengths))
        med = MediumCoefficients(grid, self.epsilon, self.mu, self.delta)
        op = MaxwellOperator(grid, med)
        model = make_model(self.model_name, **self.model_params)
        drift = None if _drift_is_zero(model) else NemytskijDrift(model, med)
        diff = None if model.name == "zero" else NemytskijDiffusion(model, med)
        spec = build_basis(grid, self.num_modes, self.decay_exponent)
        cfg = SchemeConfig(self.theta, self.picard_tol, self.picard_max_iters)
        tg = TimeGrid(self.horizon, self.fine_steps)
        u0 = sine_state(grid, self.init_amplitude, self.init_wavenumber)
        return Context(self, grid, med, op, model, drift, diff, spec, cfg, tg, u0)


def _drift_is_zero(model) -> bool:
    return model.name in ("zero", "additive")


@dataclass
class Context:
    setup: StudySetup
    grid: object
    med: MediumCoefficients
    op: MaxwellOperator
    model: object
    drift: NemytskijDrift | None
    diff: NemytskijDiffusion | None
    spec: object
    scheme: SchemeConfig
    fine_tg: TimeGrid
    u0: FieldState

    def h_norm_sq(self, values: np.ndarray) -> float:
        return float(np.dot(self.med.energy_weights, values * values))


# ---------------------------------------------------------------------------
# Parallel plumbing: the initializer rebuilds the context once per process.

_WORKER_CTX: Context | None = None
_WORKER_PARAMS: dict = {}


def _init_worker(setup: StudySetup, params: dict) -> None:
    global _WORKER_CTX, _WORKER_PARAMS
    _WORKER_CTX = setup.build()
    _WORKER_PARAMS = params


def _resolve_workers(workers: int | None) -> int:
    if workers is None or workers <= 0:
        return os.cpu_count() or 1
    return int(workers)


def _map_samples(worker_fn, setup: StudySetup, params: dict, num_samples: int,
                 workers: int | None):
    """Run worker_fn(sample_index) for every sample; order-preserving."""
    n_workers = min(_resolve_workers(workers), num_samples)
    if n_workers <= 1:
        _init_worker(setup, params)
        return [worker_fn(s) for s in range(num_samples)]
    chunk = max(1, num_samples // (4 * n_workers))
    with ProcessPoolExecutor(max_workers=n_workers, initializer=_init_worker,
                             initargs=(setup, params)) as pool:
        return list(pool.map(worker_fn, range(num_samples), chunksize=chunk))


# ---------------------------------------------------------------------------
# Mean-square error at the final time

def ms_error_at_T(reference, coarse, med: MediumCoefficients):
    """sqrt(mean ||u_ref(T) - u_coarse(T)||_H^2) over paired samples, plus a
    jackknife standard error.  Accepts sequences of Trajectory or FieldState;
    pairs must share sample indices (common random numbers)."""
    ref_states = [_final(t) for t in reference]
    coarse_states = [_final(t) for t in coarse]
    if len(ref_states) != len(coarse_states):
        raise ValueError("sample counts differ between reference and coarse sets")
    for a, b in zip(reference, coarse):
        ia, ib = _sample_index(a), _sample_index(b)
        if ia is not None and ib is not None and ia != ib:
            raise ValueError(f"sample index mismatch: {ia} vs {ib}")
    sq = np.array([
        energy(FieldState(r.grid, r.values - c.values, _checked=True), med)
        for r, c in zip(ref_states, coarse_states)
    ])
    return _sqrt_mean_with_jackknife(sq)


def _final(obj):
    return obj.final_state if isinstance(obj, Trajectory) else obj


def _sample_index(obj):
    return obj.sample_index if isinstance(obj, Trajectory) else None


def _sqrt_mean_with_jackknife(sq: np.ndarray):
    n = sq.size
    estimate = float(np.sqrt(max(sq.mean(), 0.0)))
    if n < 2:
        return estimate, float("nan")
    total = sq.sum()
    loo = np.sqrt(np.maximum((total - sq) / (n - 1), 0.0))
    se = float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return estimate, se


# ---------------------------------------------------------------------------
# Convergence study (mean-square order ladder)

@dataclass
class ConvergenceReport:
    tau_ladder: np.ndarray          # decreasing step sizes
    ladder_steps: np.ndarray        # matching step counts
    ms_errors: np.ndarray
    std_errs: np.ndarray
    fitted_order: float
    confidence_halfwidth: float
    num_samples: int
    master_seed: int
    included_in_fit: np.ndarray     # bool; finest ladder point excluded
    degenerate: bool
    monotone_within_2se: bool
    reference_steps: int


def _convergence_sample(s: int):
    ctx, params = _WORKER_CTX, _WORKER_PARAMS
    factors = params["factors"]
    path = sample_path(ctx.spec, ctx.fine_tg, ctx.setup.master_seed, s)
    ref = integrate(ctx.u0, ctx.fine_tg, ctx.scheme, ctx.op, ctx.drift, ctx.diff,
                    path, store_stride=ctx.fine_tg.num_steps, sample_index=s)
    ref_vals = ref.final_state.values
    out = np.empty(len(factors))
    for k, f in enumerate(factors):
        coarse_path = path.coarsen(f)
        traj = integrate(ctx.u0, coarse_path.time_grid, ctx.scheme, ctx.op,
                         ctx.drift, ctx.diff, coarse_path,
                         store_stride=coarse_path.time_grid.num_steps,
                         sample_index=s)
        out[k] = ctx.h_norm_sq(traj.final_state.values - ref_vals)
    ref_norm_sq = ctx.h_norm_sq(ref_vals)
    return out, ref_norm_sq


def convergence_study(setup: StudySetup, ladder_factors, num_samples: int,
                      workers: int | None = 1) -> ConvergenceReport:
    """Common-random-number tau ladder against the finest-step reference.

    For each sample one finest path is drawn; the reference integrates at the
    finest tau and every ladder point integrates the exactly-aggregated
    coarse path.  The order is the least-squares slope of log(error) vs
    log(tau), excluding the finest ladder point (its error against the
    reference is biased low by reference contamination).
    """
    factors = sorted(int(f) for f in ladder_factors)
    factors = factors[::-1]  # largest tau first -> decreasing ladder
    n_fine = setup.fine_steps
    for f in factors:
        if f < 2 or n_fine % f != 0:
            raise ValueError(f"ladder factor {f} does not divide {n_fine}")
    if num_samples < 2:
        raise ValueError("need at least two samples")
    params = {"factors": factors}
    results = _map_samples(_convergence_sample, setup, params, num_samples, workers)
    sq = np.stack([r[0] for r in results])          # (samples, ladder)
    ref_scale = float(np.sqrt(np.mean([r[1] for r in results])))

    ms_errors = np.empty(len(factors))
    std_errs = np.empty(len(factors))
    for k in range(len(factors)):
        ms_errors[k], std_errs[k] = _sqrt_mean_with_jackknife(sq[:, k])

    taus = np.array([setup.horizon / (n_fine // f) for f in factors])
    steps = np.array([n_fine // f for f in factors])

    degenerate = bool(np.max(ms_errors) <= 1e-13 * (1.0 + ref_scale))
    included = np.ones(len(factors), dtype=bool)
    if len(factors) > 2:
        included[-1] = False  # finest ladder point
    if degenerate:
        order, halfwidth = float("nan"), float("nan")
    else:
        order, halfwidth = _fit_order(taus[included], ms_errors[included],
                                      std_errs[included])

    monotone = True
    for k in range(len(factors) - 1):
        if ms_errors[k + 1] > ms_errors[k] + 2 * (std_errs[k] + std_errs[k + 1]):
            monotone = False
    return ConvergenceReport(taus, steps, ms_errors, std_errs, order, halfwidth,
                             num_samples, setup.master_seed, included, degenerate,
                             monotone, n_fine)


def _fit_order(taus, errors, std_errs):
    x = np.log(taus)
    y = np.log(errors)
    xbar = x.mean()
    sxx = np.sum((x - xbar) ** 2)
    slope = float(np.sum((x - xbar) * y) / sxx)
    # Delta method: Var(log err) ~ (se/err)^2; 1.96 sigma halfwidth.
    sigma_log = std_errs / errors
    coeffs = (x - xbar) / sxx
    halfwidth = float(1.96 * np.sqrt(np.sum(coeffs**2 * sigma_log**2)))
    return slope, halfwidth


# ---------------------------------------------------------------------------
# Energy trace (additive-noise linear-growth law)

@dataclass
class EnergyTrace:
    times: np.ndarray
    mean_energy: np.ndarray
    sample_std: np.ndarray
    model_name: str
    num_samples: int
    master_seed: int
    predicted_rate: float
    fitted_slope: float
    final_z_score: float


def diffusion_energy_rate(ctx: Context, t: float = 0.0) -> float:
    """Trace term sum_j ||B(t, u0)(sqrt(q_j) e_j)||_H^2 by direct summation."""
    total = 0.0
    for j in range(ctx.spec.num_modes):
        vj = np.sqrt(ctx.spec.eigenvalues[j]) * ctx.spec.basis_nodes[:, j]
        bv = ctx.diff.apply_raw(t, ctx.u0.values, vj)
        total += ctx.h_norm_sq(bv)
    return total


def _energy_sample(s: int):
    ctx, params = _WORKER_CTX, _WORKER_PARAMS
    stride = params["stride"]
    path = sample_path(ctx.spec, ctx.fine_tg, ctx.setup.master_seed, s)
    traj = integrate(ctx.u0, ctx.fine_tg, ctx.scheme, ctx.op, ctx.drift,
                     ctx.diff, path, store_stride=stride, sample_index=s)
    return np.array([ctx.h_norm_sq(st.values) for st in traj.states])


def energy_trace(setup: StudySetup, num_samples: int, store_points: int = 32,
                 workers: int | None = 1) -> EnergyTrace:
    """Ensemble mean of the discrete energy along time, for additive noise with
    F = 0, against the linear-growth oracle T * sum_j ||B sqrt(q_j) e_j||^2."""
    if setup.model_name != "additive":
        raise ConfigError(["energy experiment requires the 'additive' model "
                           f"(got {setup.model_name!r})"])
    stride = max(1, setup.fine_steps // store_points)
    params = {"stride": stride}
    results = _map_samples(_energy_sample, setup, params, num_samples, workers)
    energies = np.stack(results)                       # (samples, times)
    ctx = setup.build()
    traj_idx = np.array(sorted({0, setup.fine_steps}.union(
        range(stride, setup.fine_steps + 1, stride))))
    times = traj_idx * ctx.fine_tg.tau
    mean_e = energies.mean(axis=0)
    std_e = energies.std(axis=0, ddof=1) if num_samples > 1 else np.zeros_like(mean_e)

    rate = diffusion_energy_rate(ctx)
    slope = float(np.polyfit(times, mean_e, 1)[0]) if times[-1] > times[0] else 0.0
    se_final = std_e[-1] / np.sqrt(num_samples) if num_samples > 1 else float("inf")
    expected_final = energy(ctx.u0, ctx.med) + rate * setup.horizon
    z = float((mean_e[-1] - expected_final) / se_final) if se_final > 0 else 0.0
    return EnergyTrace(times, mean_e, std_e, setup.model_name, num_samples,
                       setup.master_seed, rate, slope, z)


# ---------------------------------------------------------------------------
# Hölder continuity probe

@dataclass
class HolderReport:
    lags: np.ndarray
    msq_h: np.ndarray
    se_h: np.ndarray
    msq_graph: np.ndarray
    se_graph: np.ndarray
    slope_h: float
    slope_graph: float
    num_samples: int
    num_base_times: int
    master_seed: int


def _holder_sample(s: int):
    ctx, params = _WORKER_CTX, _WORKER_PARAMS
    lag_steps = params["lag_steps"]
    base_steps = params["base_steps"]
    path = sample_path(ctx.spec, ctx.fine_tg, ctx.setup.master_seed, s)
    traj = integrate(ctx.u0, ctx.fine_tg, ctx.scheme, ctx.op, ctx.drift,
                     ctx.diff, path, store_stride=1, sample_index=s)
    states = traj.states
    out_h = np.zeros(len(lag_steps))
    out_g = np.zeros(len(lag_steps))
    for k, lag in enumerate(lag_steps):
        acc_h = acc_g = 0.0
        for b in base_steps:
            dv = states[b + lag].values - states[b].values
            acc_h += ctx.h_norm_sq(dv)
            du = FieldState(ctx.grid, dv, _checked=True)
            acc_g += graph_norm(ctx.op, du, 1) ** 2
        out_h[k] = acc_h / len(base_steps)
        out_g[k] = acc_g / len(base_steps)
    return out_h, out_g


def holder_probe(setup: StudySetup, num_samples: int, lag_steps,
                 num_base_times: int = 8, workers: int | None = 1) -> HolderReport:
    """Mean-square time increments E||u(t+h) - u(t)||^2 vs lag h, measured on
    fine trajectories at several base times; slopes reported in both the
    energy norm and the D(M) graph norm (the paper's k-parameter readings).
    A zero lag contributes its (identically zero) increment but is excluded
    from the slope fits."""
    lag_steps = sorted(int(l) for l in lag_steps)
    n = setup.fine_steps
    if lag_steps[0] < 0 or lag_steps[-1] > n:
        raise ValueError("lags must be whole step multiples within the horizon")
    max_lag = lag_steps[-1]
    base = np.unique(np.linspace(0, n - max_lag, num_base_times, dtype=int))
    params = {"lag_steps": lag_steps, "base_steps": base.tolist()}
    results = _map_samples(_holder_sample, setup, params, num_samples, workers)
    per_h = np.stack([r[0] for r in results])
    per_g = np.stack([r[1] for r in results])
    msq_h = per_h.mean(axis=0)
    msq_g = per_g.mean(axis=0)
    se_h = per_h.std(axis=0, ddof=1) / np.sqrt(num_samples)
    se_g = per_g.std(axis=0, ddof=1) / np.sqrt(num_samples)
    lags = np.array(lag_steps) * setup.horizon / n
    pos = lags > 0
    slope_h = float(np.polyfit(np.log(lags[pos]), np.log(msq_h[pos]), 1)[0])
    slope_g = float(np.polyfit(np.log(lags[pos]), np.log(msq_g[pos]), 1)[0])
    return HolderReport(lags, msq_h, se_h, msq_g, se_g, slope_h, slope_g,
                        num_samples, len(base), setup.master_seed)


# ---------------------------------------------------------------------------
# Local truncation error probe

@dataclass
class TruncationReport:
    taus: np.ndarray
    msq_delta: np.ndarray
    se_delta: np.ndarray
    msq_conditional: np.ndarray
    se_conditional: np.ndarray
    slope_delta: float
    slope_conditional: float
    inner_ensemble: int
    num_anchors: int
    num_samples: int
    master_seed: int


def _truncation_sample(s: int):
    ctx, params = _WORKER_CTX, _WORKER_PARAMS
    factors = params["factors"]
    anchors = params["anchors"]
    inner = params["inner"]
    tau_fine = ctx.fine_tg.tau
    seed = ctx.setup.master_seed

    # Outer fine trajectory up to the last anchor; anchor states frozen.
    path = sample_path(ctx.spec, ctx.fine_tg, seed, s)
    last = max(anchors)
    outer_tg = TimeGrid(last * tau_fine, last)
    outer_path = _slice_path(path, 0, last, outer_tg)
    traj = integrate(ctx.u0, outer_tg, ctx.scheme, ctx.op, ctx.drift, ctx.diff,
                     outer_path, store_stride=1, sample_index=s)

    msq = np.zeros(len(factors))
    cond = np.zeros(len(factors))
    for a_idx, n0 in enumerate(anchors):
        u_anchor = traj.states[n0]
        t_anchor = n0 * tau_fine
        b_coeff = (ctx.diff.coefficients_raw(t_anchor, u_anchor.values)
                   if ctx.diff is not None else None)
        for k, f in enumerate(factors):
            tau = f * tau_fine
            inner_tg = TimeGrid(tau, f)
            deltas = np.empty((inner, ctx.grid.num_unknowns))
            for m in range(inner):
                ipath = sample_path(ctx.spec, inner_tg, seed, s,
                                    context=(_INNER_TAG, a_idx, k, m))
                itraj = integrate(u_anchor, inner_tg, ctx.scheme, ctx.op,
                                  ctx.drift, ctx.diff, ipath,
                                  store_stride=f, t_start=t_anchor)
                u_end = itraj.final_state.values
                delta = u_end - u_anchor.values
                delta -= tau * ctx.op.apply_raw(u_end)
                if ctx.drift is not None:
                    delta -= tau * ctx.drift.eval_raw(t_anchor + tau, u_end)
                if b_coeff is not None:
                    dw = ipath.coarsen(f).increment_field(0)
                    bdw = b_coeff * dw
                    ctx.grid.zero_boundary_e(bdw)
                    delta -= bdw
                deltas[m] = delta
            msq[k] += np.mean([ctx.h_norm_sq(d) for d in deltas])
            cond[k] += ctx.h_norm_sq(deltas.mean(axis=0))
    return msq / len(anchors), cond / len(anchors)


def _slice_path(path, start, stop, time_grid):
    from .noise import WienerPath

    return WienerPath(path.spec, time_grid, path.increments[start:stop],
                      path.seed, path.sample_index, path.context)


def truncation_probe(setup: StudySetup, num_samples: int, factors,
                     inner_ensemble: int = 64, num_anchors: int = 3,
                     workers: int | None = 1) -> TruncationReport:
    """Scheme residual delta^{n+1} of the fine-flow surrogate solution.

    delta^{n+1} = u(t_n + tau) - u(t_n) - tau M u(t_n+tau)
                  - tau F(t_n+tau, u(t_n+tau)) - B(t_n, u(t_n)) DeltaW^{n+1},

    with u(.) realized by the finest-step trajectory.  At each anchor t_n the
    state is frozen and ``inner_ensemble`` fresh noise continuations produce
    per-path residuals; their mean estimates E(delta | F_{t_n}).  Reported per
    ladder tau: the mean of ||delta||^2 and the squared norm of the inner mean,
    each averaged over anchors and outer samples.
    """
    factors = sorted(int(f) for f in factors)
    n = setup.fine_steps
    max_f = factors[-1]
    for f in factors:
        if f < 1 or n % f != 0:
            raise ValueError(f"factor {f} does not divide the fine grid ({n})")
    # Anchors at interior fractions of the horizon, aligned to the coarsest tau.
    raw = [int(round(frac * n)) for frac in np.linspace(0.25, 0.75, num_anchors)]
    anchors = sorted({max(max_f, (r // max_f) * max_f) for r in raw})
    if anchors[-1] + max_f > n:
        raise ValueError("anchors plus coarsest tau exceed the horizon")
    params = {"factors": factors, "anchors": anchors, "inner": int(inner_ensemble)}
    results = _map_samples(_truncation_sample, setup, params, num_samples, workers)
    msq = np.stack([r[0] for r in results])
    cond = np.stack([r[1] for r in results])
    taus = np.array(factors, dtype=float) * setup.horizon / n

    def reduce(mat):
        mean = mat.mean(axis=0)
        se = (mat.std(axis=0, ddof=1) / np.sqrt(num_samples)
              if num_samples > 1 else np.zeros(mean.shape))
        return mean, se

    msq_mean, msq_se = reduce(msq)
    cond_mean, cond_se = reduce(cond)
    slope_d = float(np.polyfit(np.log(taus), np.log(msq_mean), 1)[0])
    slope_c = float(np.polyfit(np.log(taus), np.log(cond_mean), 1)[0])
    return TruncationReport(taus, msq_mean, msq_se, cond_mean, cond_se, slope_d,
                            slope_c, int(inner_ensemble), len(anchors),
                            num_samples, setup.master_seed)


# ---------------------------------------------------------------------------
# Discrete moment stability sweep

@dataclass
class StabilityReport:
    times: np.ndarray
    moments: dict           # p -> array of E||u^n||_{D(M)}^p over stored times
    initial: dict           # p -> value at n = 0
    max_ratio: dict         # p -> max_n moment / (1 + initial)
    num_samples: int
    master_seed: int


def _stability_sample(s: int):
    ctx, params = _WORKER_CTX, _WORKER_PARAMS
    stride = params["stride"]
    p_list = params["p_list"]
    path = sample_path(ctx.spec, ctx.fine_tg, ctx.setup.master_seed, s)
    traj = integrate(ctx.u0, ctx.fine_tg, ctx.scheme, ctx.op, ctx.drift,
                     ctx.diff, path, store_stride=stride, sample_index=s)
    gns = np.array([graph_norm(ctx.op, st, 1) for st in traj.states])
    return np.stack([gns**p for p in p_list])


def stability_sweep(setup: StudySetup, num_samples: int, p_list=(2, 4),
                    store_points: int = 32,
                    workers: int | None = 1) -> StabilityReport:
    """Track E||u^n||_{D(M)}^p along the run; the acceptance bound is
    max_n moment <= 10 (1 + moment at n=0)."""
    p_list = tuple(int(p) for p in p_list)
    stride = max(1, setup.fine_steps // store_points)
    params = {"stride": stride, "p_list": p_list}
    results = _map_samples(_stability_sample, setup, params, num_samples, workers)
    stacked = np.stack(results)                # (samples, p, times)
    mom = stacked.mean(axis=0)
    ctx = setup.build()
    idx = np.array(sorted({0, setup.fine_steps}.union(
        range(stride, setup.fine_steps + 1, stride))))
    times = idx * ctx.fine_tg.tau
    moments = {p: mom[i] for i, p in enumerate(p_list)}
    initial = {p: float(mom[i][0]) for i, p in enumerate(p_list)}
    ratio = {p: float(np.max(mom[i]) / (1.0 + initial[p])) for i, p in enumerate(p_list)}
    return StabilityReport(times, moments, initial, ratio, num_samples,
                           setup.master_seed)


# ---------------------------------------------------------------------------
# Single run (trajectory diagnostics)

@dataclass
class SingleRunReport:
    times: np.ndarray
    energies: np.ndarray
    graph_norms: np.ndarray
    max_picard_iters: int
    max_picard_residual: float
    master_seed: int


def single_run(setup: StudySetup, store_points: int = 64,
               sample_index: int = 0) -> SingleRunReport:
    ctx = setup.build()
    stride = max(1, setup.fine_steps // store_points)
    path = sample_path(ctx.spec, ctx.fine_tg, setup.master_seed, sample_index)
    traj = integrate(ctx.u0, ctx.fine_tg, ctx.scheme, ctx.op, ctx.drift,
                     ctx.diff, path, store_stride=stride,
                     sample_index=sample_index)
    energies = np.array([ctx.h_norm_sq(st.values) for st in traj.states])
    gns = np.array([graph_norm(ctx.op, st, 1) for st in traj.states])
    return SingleRunReport(traj.state_times, energies, gns,
                           int(traj.picard_iters.max(initial=0)),
                           float(traj.picard_residuals.max(initial=0.0)),
                           setup.master_seed)
