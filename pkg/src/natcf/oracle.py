"""Brute-force grid reference solver for small ancestor sets.

Enumerates the noise values of the change target's strict ancestors over the
epsilon box, derives the target's noise by exact inversion, and keeps the
feasible point of least distance. Used to certify the gradient solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distance import ENDOGENOUS_L1
from .errors import TooManyDimensions
from .fio import (
    FEASIBLE,
    INFEASIBLE,
    ChangeRequest,
    FioConfig,
    FioResult,
    _fact_arrays,
    _Plan,
)
from .graph import descendant_weights
from .scm import Scm

_BOUNDARY_SHRINK = 1e-12  # Definition of feasibility uses strict inequalities.


@dataclass(frozen=True)
class GridSpec:
    resolution: int = 401
    max_dims: int = 3
    chunk: int = 262_144

    def validate(self) -> "GridSpec":
        if self.resolution < 3 or self.resolution % 2 == 0:
            raise TooManyDimensions("resolution must be odd and >= 3")
        return self


def grid_solve(
    scm: Scm,
    evidence,
    change: ChangeRequest,
    cfg: FioConfig,
    grid: GridSpec = GridSpec(),
) -> FioResult:
    cfg.validate()
    grid.validate()
    plan = _Plan(scm, change.target, cfg)
    d = len(plan.free)
    if d > grid.max_dims:
        raise TooManyDimensions(
            f"{d} free dimensions exceed the grid cap of {grid.max_dims}"
        )
    fact = _fact_arrays(scm, plan, [evidence], [change.value])
    target = change.target

    axes = []
    for j in plan.free:
        nz = plan.mechs[j].noise
        lo = nz.quantile(cfg.epsilon)
        hi = nz.quantile(1.0 - cfg.epsilon)
        axes.append(np.linspace(lo, hi, grid.resolution))

    weights = descendant_weights(scm.graph) if cfg.distance != ENDOGENOUS_L1 else None
    eps = cfg.epsilon + _BOUNDARY_SHRINK

    best_dist = np.inf
    best_point = None  # (free noise vector, values dict, u_target, cdf dict)

    for chunk_axes in _chunked_mesh(axes, grid.chunk, d):
        n = chunk_axes.shape[0]
        vals = {}
        ok = np.ones(n, dtype=bool)
        u_of = {}
        for k, j in enumerate(plan.free):
            u_of[j] = chunk_axes[:, k]
        for j in plan.free:
            mech = plan.mechs[j]
            env = {p: vals[p] for p in mech.parent_order}
            vals[j] = mech.g_value(env) + mech.scale * u_of[j]
        mech_t = plan.mechs[target]
        env_t = {p: vals[p] for p in mech_t.parent_order}
        u_t = (fact["a_star"][0] - mech_t.g_value(env_t)) / mech_t.scale
        u_t = np.broadcast_to(np.asarray(u_t, dtype=np.float64), (n,))
        u_of[target] = u_t

        cdf = {}
        for j in plan.ancestors:
            nz = plan.mechs[j].noise
            cdf[j] = nz.cdf(u_of[j])
            ok &= (cdf[j] > eps) & (nz.sf(u_of[j]) > eps)
        if not ok.any():
            continue

        if cfg.distance == ENDOGENOUS_L1:
            dist = np.full(n, abs(fact["a_star"][0] - fact["v"][target][0]) / plan.sigma[target])
            for j in plan.free:
                dist += np.abs(vals[j] - fact["v"][j][0]) / plan.sigma[j]
        else:
            dist = np.zeros(n)
            for j in plan.ancestors:
                nz = plan.mechs[j].noise
                dist += weights[j] * np.abs(cdf[j] - nz.cdf(fact["u"][j][0]))

        dist = np.where(ok, dist, np.inf)
        i = int(np.argmin(dist))
        if dist[i] < best_dist:
            best_dist = float(dist[i])
            best_point = (
                {j: float(u_of[j][i]) for j in plan.free},
                {j: float(vals[j][i]) for j in plan.free},
                float(u_t[i]),
                {j: float(np.broadcast_to(cdf[j], (n,))[i]) for j in plan.ancestors},
            )

    a_star = float(fact["a_star"][0])
    if best_point is None:
        return FioResult(
            status=INFEASIBLE,
            lbf_targets={},
            cf_ancestors={},
            cf_noise={},
            distance=np.inf,
            penalty_residual=np.inf,
            per_variable_cdf={},
            steps_used=0,
        )
    free_u, free_v, u_t, cdfs = best_point
    cf_anc = dict(free_v)
    cf_anc[target] = a_star
    cf_noise = dict(free_u)
    cf_noise[target] = u_t
    lbf = {target: a_star}
    for j in plan.free:
        if abs(free_v[j] - float(fact["v"][j][0])) / plan.sigma[j] > cfg.change_tolerance:
            lbf[j] = free_v[j]
    return FioResult(
        status=FEASIBLE,
        lbf_targets=lbf,
        cf_ancestors=cf_anc,
        cf_noise=cf_noise,
        distance=best_dist,
        penalty_residual=0.0,
        per_variable_cdf=cdfs,
        steps_used=0,
    )


def _chunked_mesh(axes, chunk, d):
    """Cartesian product of the axes, streamed as (n, d) blocks."""
    if d == 0:
        yield np.zeros((1, 0))
        return
    sizes = [len(a) for a in axes]
    total = int(np.prod(sizes))
    if total <= chunk:
        mesh = np.stack(
            [m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1
        )
        yield mesh
        return
    # Stream over the leading axis in groups to bound memory.
    tail_total = total // sizes[0]
    group = max(1, chunk // tail_total)
    tail = np.stack(
        [m.ravel() for m in np.meshgrid(*axes[1:], indexing="ij")], axis=-1
    ) if d > 1 else np.zeros((1, 0))
    for start in range(0, sizes[0], group):
        lead = axes[0][start : start + group]
        block = np.empty((len(lead) * tail_total, d))
        block[:, 0] = np.repeat(lead, tail_total)
        if d > 1:
            block[:, 1:] = np.tile(tail, (len(lead), 1))
        yield block
