import numpy as np
import pytest

from stochmaxwell.errors import StepError
from stochmaxwell.fields import (
    FieldState,
    Grid1D,
    MediumCoefficients,
    TimeGrid,
    energy,
    sine_state,
    smooth_random_state,
)
from stochmaxwell.integrator import (
    SchemeConfig,
    StepKernel,
    energy_identity_defect,
    integrate,
    step,
)
from stochmaxwell.models import NemytskijDiffusion, NemytskijDrift, make_model
from stochmaxwell.noise import WienerPath, build_basis, sample_path
from stochmaxwell.operators import MaxwellOperator, SemigroupOracle, ShiftedSolver


@pytest.fixture
def system():
    grid = Grid1D(16, 1.0)
    med = MediumCoefficients(grid, 1.0, 1.0)
    op = MaxwellOperator(grid, med)
    return grid, med, op


def make_noise(grid, n_steps=32, seed=5, modes=4):
    spec = build_basis(grid, modes, 6.0)
    tg = TimeGrid(1.0, n_steps)
    return spec, tg, sample_path(spec, tg, master_seed=seed)


def test_zero_everything_stays_zero(system):
    grid, med, op = system
    cfg = SchemeConfig()
    drift = NemytskijDrift(make_model("zero"), med)
    u0 = FieldState.zeros(grid)
    u1 = step(u0, 0.0, cfg, op, drift=drift, tau=0.1)
    assert np.all(u1.values == 0.0)


def test_implicit_euler_contracts(system):
    grid, med, op = system
    cfg = SchemeConfig(theta=1.0)
    u = smooth_random_state(grid, np.random.default_rng(1))
    kernel = StepKernel(cfg, op, None, None, tau=0.25)
    vals = u.values
    prev = energy(u, med)
    for _ in range(20):
        vals, _, _ = kernel.step_raw(vals, 0.0, None)
        cur = energy(FieldState(grid, vals), med)
        assert cur <= prev * (1 + 1e-13)
        prev = cur


def test_implicit_euler_equals_resolvent(system):
    grid, med, op = system
    cfg = SchemeConfig(theta=1.0)
    tau = 0.125
    u = smooth_random_state(grid, np.random.default_rng(2))
    u1 = step(u, 0.0, cfg, op, tau=tau)
    expected = ShiftedSolver(op, tau).solve(u)
    assert np.array_equal(u1.values, expected.values)


def test_midpoint_conserves_energy_thousand_steps(system):
    grid, med, op = system
    cfg = SchemeConfig(theta=0.5)
    tau = 1e-3
    kernel = StepKernel(cfg, op, None, None, tau)
    u = smooth_random_state(grid, np.random.default_rng(3))
    e0 = energy(u, med)
    vals = u.values
    for _ in range(1000):
        vals, _, _ = kernel.step_raw(vals, 0.0, None)
    drift = abs(energy(FieldState(grid, vals), med) - e0)
    assert drift <= 1e-9 * e0


def test_single_step_equals_n1_integration(system):
    grid, med, op = system
    cfg = SchemeConfig()
    med_drift = NemytskijDrift(make_model("tanh-saturable", scale=1.0), op.med)
    tg = TimeGrid(0.5, 1)
    u0 = sine_state(grid)
    traj = integrate(u0, tg, cfg, op, drift=med_drift)
    direct = step(u0, 0.0, cfg, op, drift=med_drift, tau=tg.tau)
    assert np.array_equal(traj.final_state.values, direct.values)
    assert traj.states[0] is u0


def test_linear_case_converges_to_semigroup(system):
    # theta = 1, F = 0, B = 0: first-order convergence to exp(TM)u0.
    grid, med, op = system
    oracle = SemigroupOracle(op)
    u0 = sine_state(grid)
    t_final = 1.0
    exact = oracle.apply(u0, t_final)
    errs, taus = [], []
    for n in (16, 32, 64, 128, 256):
        tg = TimeGrid(t_final, n)
        traj = integrate(u0, tg, SchemeConfig(theta=1.0), op)
        diff = FieldState(grid, traj.final_state.values - exact.values)
        errs.append(np.sqrt(energy(diff, med)))
        taus.append(tg.tau)
    slope = np.polyfit(np.log(taus), np.log(errs), 1)[0]
    assert slope >= 0.9


def test_full_run_deterministic(system):
    grid, med, op = system
    spec, tg, path = make_noise(grid)
    cfg = SchemeConfig()
    drift = NemytskijDrift(make_model("tanh-saturable", scale=2.0), med)
    diff = NemytskijDiffusion(make_model("tanh-saturable", scale=2.0), med)
    u0 = sine_state(grid)
    t1 = integrate(u0, tg, cfg, op, drift, diff, path)
    t2 = integrate(u0, tg, cfg, op, drift, diff,
                   sample_path(spec, tg, master_seed=5))
    for a, b in zip(t1.states, t2.states):
        assert np.array_equal(a.values, b.values)


def test_exact_solve_consistency_linear_drift(system):
    # Linear drift: the converged Picard step must match the closed-form
    # solve of the assembled affine system to 1e-11 relative.
    grid, med, op = system
    sigma = 0.7
    theta = 1.0
    tau = 0.05
    cfg = SchemeConfig(theta=theta, picard_tol=1e-13)
    drift = NemytskijDrift(make_model("linear-damping", sigma=sigma), med)
    u0 = smooth_random_state(grid, np.random.default_rng(4))

    d = np.zeros(grid.num_unknowns)
    d[grid.e_slice] = -sigma * med.inv_epsilon
    d[grid.h_slice] = -sigma * med.inv_mu
    d[grid.boundary_e_indices] = 0.0
    a_full = (np.eye(grid.num_unknowns) - tau * theta * op.matrix.toarray()
              - tau * theta * np.diag(d))
    expected = np.linalg.solve(a_full, u0.values)

    got = step(u0, 0.0, cfg, op, drift=drift, tau=tau)
    rel = np.linalg.norm(got.values - expected) / np.linalg.norm(expected)
    assert rel <= 1e-11


def test_adaptedness_increment_access_order(system):
    grid, med, op = system
    spec, tg, path = make_noise(grid, n_steps=16)

    accessed = []

    class LoggingPath(WienerPath):
        def increment_field(self, n):
            accessed.append(n)
            return super().increment_field(n)

    logging_path = LoggingPath(spec, tg, path.increments, path.seed)
    diff = NemytskijDiffusion(make_model("additive", level=1.0), med)
    integrate(FieldState.zeros(grid), tg, SchemeConfig(), op, None, diff,
              logging_path)
    # Step n consumes exactly increment n, in order: never a future index.
    assert accessed == list(range(16))


def test_energy_identity_zero_case(system):
    grid, med, op = system
    z = FieldState.zeros(grid)
    assert energy_identity_defect(z, z, 0.0, 0.1, 1.0, op, None, None) == 0.0


@pytest.mark.parametrize("theta", [1.0, 0.5])
def test_energy_identity_random_step(system, theta):
    grid, med, op = system
    spec, tg, path = make_noise(grid, n_steps=8, seed=11)
    model = make_model("tanh-saturable", scale=1.0)
    drift = NemytskijDrift(model, med)
    diff = NemytskijDiffusion(model, med)
    cfg = SchemeConfig(theta=theta, picard_tol=1e-13)
    u0 = sine_state(grid)
    dw = path.increment_field(0)
    b_dw = diff.apply(0.0, u0, dw)
    u1 = step(u0, 0.0, cfg, op, drift, diff, dw, tau=tg.tau)
    defect = energy_identity_defect(u0, u1, 0.0, tg.tau, theta, op, drift, b_dw)
    scale = max(1.0, energy(u1, med))
    assert abs(defect) <= 1e-10 * scale


def test_energy_identity_degrades_with_loose_picard(system):
    grid, med, op = system
    spec, tg, path = make_noise(grid, n_steps=8, seed=12)
    model = make_model("tanh-saturable", scale=2.0)
    drift = NemytskijDrift(model, med)
    diff = NemytskijDiffusion(model, med)
    u0 = sine_state(grid)
    dw = path.increment_field(0)
    b_dw = diff.apply(0.0, u0, dw)
    defects = {}
    for tol in (1e-13, 1e-3):
        cfg = SchemeConfig(theta=1.0, picard_tol=tol, picard_max_iters=100)
        u1 = step(u0, 0.0, cfg, op, drift, diff, dw, tau=tg.tau)
        defects[tol] = abs(energy_identity_defect(u0, u1, 0.0, tg.tau, 1.0, op,
                                                  drift, b_dw))
    assert defects[1e-3] > 100 * defects[1e-13]


def test_contraction_warning_and_picard_failure(system):
    grid, med, op = system
    drift = NemytskijDrift(make_model("linear-damping", sigma=300.0), med)
    u0 = sine_state(grid)
    with pytest.warns(RuntimeWarning, match="contraction precondition"):
        with pytest.raises(StepError):
            step(u0, 0.0, SchemeConfig(picard_max_iters=10), op, drift=drift,
                 tau=0.5)


def test_step_error_carries_index(system):
    grid, med, op = system
    drift = NemytskijDrift(make_model("linear-damping", sigma=300.0), med)
    tg = TimeGrid(1.0, 4)
    with pytest.warns(RuntimeWarning):
        with pytest.raises(StepError) as excinfo:
            integrate(sine_state(grid), tg, SchemeConfig(picard_max_iters=5),
                      op, drift=drift)
    assert excinfo.value.step_index == 0


def test_storage_stride(system):
    grid, med, op = system
    tg = TimeGrid(1.0, 10)
    u0 = sine_state(grid)
    traj = integrate(u0, tg, SchemeConfig(), op, store_stride=4)
    assert list(traj.stored_indices) == [0, 4, 8, 10]
    assert len(traj.states) == 4
    full = integrate(u0, tg, SchemeConfig(), op)
    assert list(full.stored_indices) == list(range(11))


def test_path_resolution_mismatch_rejected(system):
    grid, med, op = system
    spec, tg, path = make_noise(grid, n_steps=32)
    diff = NemytskijDiffusion(make_model("additive"), med)
    wrong_tg = TimeGrid(1.0, 16)
    with pytest.raises(ValueError, match="coarsen"):
        integrate(FieldState.zeros(grid), wrong_tg, SchemeConfig(), op,
                  None, diff, path)
    # Coarsening the path first is the documented fix.
    integrate(FieldState.zeros(grid), wrong_tg, SchemeConfig(), op, None,
              diff, path.coarsen(2))


def test_scheme_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(theta=1.5)
    with pytest.raises(ValueError):
        SchemeConfig(picard_tol=0.0)
    with pytest.raises(ValueError):
        SchemeConfig(picard_max_iters=0)
