"""Current densities and the drift/diffusion Nemytskij operators they induce.

A ``CurrentModel`` packages the four pointwise current laws (drift pair
je/jm, diffusion pair jer/jmr) as vectorized evaluators ``f(t, x, e, h)``
together with the declared growth/Lipschitz constant L, i.e. the claims

    |J(t,x,u,v)|          <= L (1 + |u| + |v|)
    |J(t,x,u1,v1)-J(s,x,u2,v2)| <= L (|t-s| + |u1-u2| + |v1-v2|)

which ``lipschitz_probe`` checks empirically on random tuples.

The drift operator maps a state to
    F(t,u) = (-eps^-1 je(t,x,E,H), -mu^-1 jm(t,x,E,H))
evaluated per node class; the field component that does not live on a node
is brought there by two-point averaging (single-neighbor copy at interval
ends, neighbor mean at 2D vertices).  The diffusion acts on a scalar noise
field w as B(t,u)w = (-eps^-1 jer * w, -mu^-1 jmr * w) pointwise.  PEC
boundary E entries of both outputs are projected to zero, matching the
eliminated boundary unknowns of the time stepping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GridMismatchError
from .fields import FieldState, Grid, Grid1D, GridTM2D, MediumCoefficients

Evaluator = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CurrentModel:
    name: str
    je: Evaluator
    jm: Evaluator
    jer: Evaluator
    jmr: Evaluator
    lipschitz_L: float
    time_dependent: bool = False


def _zeros(t, x, e, h):
    return np.zeros_like(np.asarray(e, dtype=float))


def make_model(name: str, *, sigma: float = 0.5, scale: float = 1.0,
               level: float = 1.0, declared_lipschitz: float | None = None) -> CurrentModel:
    """Built-in models by name.

    zero            all currents vanish
    linear-damping  J_e = sigma*E, J_m = sigma*H (same law for the diffusion pair)
    tanh-saturable  J = scale*tanh(co-located component); every derivative bounded
    additive        drift currents zero, diffusion currents constant = level
    """
    if name == "zero":
        L = 0.0
        model = CurrentModel("zero", _zeros, _zeros, _zeros, _zeros, L)
    elif name == "linear-damping":
        def je(t, x, e, h, s=sigma):
            return s * e

        def jm(t, x, e, h, s=sigma):
            return s * h

        L = abs(sigma)
        model = CurrentModel("linear-damping", je, jm, je, jm, L)
    elif name == "tanh-saturable":
        def je(t, x, e, h, s=scale):
            return s * np.tanh(e)

        def jm(t, x, e, h, s=scale):
            return s * np.tanh(h)

        L = abs(scale)
        model = CurrentModel("tanh-saturable", je, jm, je, jm, L)
    elif name == "additive":
        def jr(t, x, e, h, c=level):
            return np.full_like(np.asarray(e, dtype=float), c)

        L = abs(level)
        model = CurrentModel("additive", _zeros, _zeros, jr, jr, L)
    else:
        raise ValueError(f"unknown model {name!r}")
    if declared_lipschitz is not None:
        model = CurrentModel(model.name, model.je, model.jm, model.jer, model.jmr,
                             float(declared_lipschitz), model.time_dependent)
    return model


class _NodeArgs:
    """Per-node-class (x, E, H) argument assembly for one grid."""

    def __init__(self, grid: Grid):
        self.grid = grid

    def at_e_nodes(self, values: np.ndarray):
        g = self.grid
        e = values[g.e_slice]
        if isinstance(g, Grid1D):
            h_bar = g.interp_h_to_e(values[g.h_slice])
        else:
            hx = values[g.hx_slice].reshape(g.shape_hx)
            hy = values[g.hy_slice].reshape(g.shape_hy)
            h_bar = g.interp_h_to_e(hx, hy).ravel()
        return g.e_coords, e, h_bar

    def at_h_nodes(self, values: np.ndarray):
        """Returns a list of (coords, e_arg, h_arg) per H node class."""
        g = self.grid
        if isinstance(g, Grid1D):
            e_bar = g.interp_e_to_h(values[g.e_slice])
            return [(g.h_coords, e_bar, values[g.h_slice])]
        e2d = values[g.e_slice].reshape(g.shape_e)
        return [
            (g.hx_coords, g.interp_e_to_hx(e2d).ravel(), values[g.hx_slice]),
            (g.hy_coords, g.interp_e_to_hy(e2d).ravel(), values[g.hy_slice]),
        ]


class NemytskijDrift:
    """F(t,u) induced by the drift currents of a model on one grid/medium."""

    def __init__(self, model: CurrentModel, med: MediumCoefficients):
        self.model = model
        self.med = med
        self.grid = med.grid
        self._args = _NodeArgs(self.grid)

    def eval_raw(self, t: float, values: np.ndarray) -> np.ndarray:
        out = np.empty_like(values)
        g = self.grid
        xe, e, h_bar = self._args.at_e_nodes(values)
        out[g.e_slice] = -self.med.inv_epsilon * self.model.je(t, xe, e, h_bar)
        pieces = [
            -self.model.jm(t, xh, e_arg, h_arg)
            for xh, e_arg, h_arg in self._args.at_h_nodes(values)
        ]
        out[g.h_slice] = self.med.inv_mu * np.concatenate(pieces)
        g.zero_boundary_e(out)
        return out

    def eval(self, t: float, u: FieldState) -> FieldState:
        self.grid.check_state(u)
        return FieldState(self.grid, self.eval_raw(t, u.values))


class NemytskijDiffusion:
    """B(t,u) applied to a node-sampled scalar increment field."""

    def __init__(self, model: CurrentModel, med: MediumCoefficients):
        self.model = model
        self.med = med
        self.grid = med.grid
        self._args = _NodeArgs(self.grid)

    def coefficients_raw(self, t: float, values: np.ndarray) -> np.ndarray:
        """The pointwise factors (-eps^-1 jer, -mu^-1 jmr), before the noise."""
        out = np.empty_like(values)
        g = self.grid
        xe, e, h_bar = self._args.at_e_nodes(values)
        out[g.e_slice] = -self.med.inv_epsilon * self.model.jer(t, xe, e, h_bar)
        pieces = [
            -self.model.jmr(t, xh, e_arg, h_arg)
            for xh, e_arg, h_arg in self._args.at_h_nodes(values)
        ]
        out[g.h_slice] = self.med.inv_mu * np.concatenate(pieces)
        return out

    def apply_raw(self, t: float, values: np.ndarray, dw_nodes: np.ndarray) -> np.ndarray:
        out = self.coefficients_raw(t, values) * dw_nodes
        self.grid.zero_boundary_e(out)
        return out

    def apply(self, t: float, u: FieldState, dw_nodes: np.ndarray) -> FieldState:
        self.grid.check_state(u)
        if dw_nodes.shape != (self.grid.num_unknowns,):
            raise GridMismatchError("increment field does not match the grid")
        return FieldState(self.grid, self.apply_raw(t, u.values, dw_nodes))


def eval_F(t: float, u: FieldState, drift: NemytskijDrift) -> FieldState:
    return drift.eval(t, u)


def eval_B_apply(t: float, u: FieldState, diff: NemytskijDiffusion,
                 dw_nodes: np.ndarray) -> FieldState:
    return diff.apply(t, u, dw_nodes)


@dataclass(frozen=True)
class ProbeBox:
    field_range: tuple[float, float] = (-10.0, 10.0)
    time_range: tuple[float, float] = (0.0, 1.0)
    space_range: tuple[float, float] = (0.0, 1.0)
    dimension: int = 1


@dataclass(frozen=True)
class ProbeReport:
    model_name: str
    declared_lipschitz: float
    num_probes: int
    max_growth_ratio: float
    max_lipschitz_ratio: float
    passed: bool
    box: ProbeBox
    seed: int


def lipschitz_probe(model: CurrentModel, num_probes: int, seed: int,
                    box: ProbeBox = ProbeBox()) -> ProbeReport:
    """Empirically check the growth/Lipschitz claims on random tuples.

    PASS iff every observed ratio against the declared-L bound is <= 1 + 1e-9.
    """
    if num_probes < 1:
        raise ValueError("need at least one probe")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    lo, hi = box.field_range
    t0, t1 = box.time_range
    x0, x1 = box.space_range
    n = int(num_probes)
    t = rng.uniform(t0, t1, n)
    s = rng.uniform(t0, t1, n)
    if box.dimension == 1:
        x = rng.uniform(x0, x1, n)
    else:
        x = rng.uniform(x0, x1, (n, box.dimension))
    u1, v1, u2, v2 = (rng.uniform(lo, hi, n) for _ in range(4))

    L = model.lipschitz_L
    max_growth = 0.0
    max_lip = 0.0
    tiny = 1e-300
    for evaluator in (model.je, model.jm, model.jer, model.jmr):
        j1 = np.asarray(evaluator(t, x, u1, v1), dtype=float)
        growth_den = L * (1.0 + np.abs(u1) + np.abs(v1))
        growth = np.where(growth_den > tiny, np.abs(j1) / np.maximum(growth_den, tiny),
                          np.where(np.abs(j1) > tiny, np.inf, 0.0))
        max_growth = max(max_growth, float(growth.max()))

        j2 = np.asarray(evaluator(s, x, u2, v2), dtype=float)
        lip_den = L * (np.abs(t - s) + np.abs(u1 - u2) + np.abs(v1 - v2))
        lip = np.where(lip_den > tiny, np.abs(j1 - j2) / np.maximum(lip_den, tiny),
                       np.where(np.abs(j1 - j2) > tiny, np.inf, 0.0))
        max_lip = max(max_lip, float(lip.max()))

    passed = max_growth <= 1.0 + 1e-9 and max_lip <= 1.0 + 1e-9
    return ProbeReport(model.name, L, n, max_growth, max_lip, passed, box, int(seed))
