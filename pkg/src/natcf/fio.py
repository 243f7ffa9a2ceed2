"""Feasible Intervention Optimization.

Minimizes backtracking distance over the noise values of the change target's
strict ancestors, subject to the target taking its requested value exactly
(enforced by inverting the target's mechanism, never by optimization) and to
an epsilon box on every ancestor's noise CDF, imposed through a weighted
hinge penalty.

The solver core is vectorized over a batch of independent queries; the
scalar ``solve`` is a batch of one, so both paths share every floating-point
operation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .distance import (
    ENDOGENOUS_L1,
    MECHANISM_CDF,
    StandardizationStats,
    check_distance,
)
from .errors import (
    ConstantMechanism,
    InvalidConfig,
    MissingValue,
    NotFeasible,
    UnknownVariable,
)
from .graph import ancestors_including, descendant_weights
from .naturalness import CONDITIONAL_CDF, EXOGENOUS_CDF, check_measure
from .scm import Scm, abduct_batch

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"

ADAPTIVE_MOMENT = "adaptive_moment"
PLAIN_GD = "plain_gd"

_BETA1, _BETA2, _ADAM_EPS = 0.9, 0.999, 1e-8
_STALL_WINDOW = 500
_STALL_TOL = 1e-12
_JITTER_STD = 0.5
_RESTORE_STEPS = 1000
_RESTORE_LR = 0.05
_RESTORE_MARGIN = 0.95


@dataclass(frozen=True)
class ChangeRequest:
    """change(target = value): the desired modification."""

    target: str
    value: float


@dataclass(frozen=True)
class FioConfig:
    epsilon: float = 1e-4
    w_epsilon: float = 1e4
    learning_rate: float = 1e-3
    steps: int = 50_000
    optimizer: str = ADAPTIVE_MOMENT
    restarts: int = 1
    seed: int = 0
    change_tolerance: float = 1e-6  # standardized units
    inversion_tolerance: float = 1e-8
    distance: str = ENDOGENOUS_L1
    measure: str = CONDITIONAL_CDF
    stats: StandardizationStats | None = None

    def validate(self) -> "FioConfig":
        if not 0.0 < self.epsilon < 0.5:
            raise InvalidConfig(f"epsilon must lie in (0, 0.5), got {self.epsilon}")
        if self.w_epsilon <= 0 or self.learning_rate <= 0:
            raise InvalidConfig("w_epsilon and learning_rate must be positive")
        if self.steps < 0 or self.restarts < 1:
            raise InvalidConfig("steps must be >= 0 and restarts >= 1")
        if self.change_tolerance <= 0 or self.inversion_tolerance <= 0:
            raise InvalidConfig("tolerances must be positive")
        if self.optimizer not in (ADAPTIVE_MOMENT, PLAIN_GD):
            raise InvalidConfig(f"unknown optimizer {self.optimizer!r}")
        check_distance(self.distance)
        check_measure(self.measure)
        if self.measure not in (EXOGENOUS_CDF, CONDITIONAL_CDF):
            raise InvalidConfig(
                "the optimizer enforces the noise-CDF box; use a CDF measure"
            )
        return self

    def with_stats(self, stats: StandardizationStats) -> "FioConfig":
        return replace(self, stats=stats)


@dataclass
class FioResult:
    status: str
    lbf_targets: dict[str, float]
    cf_ancestors: dict[str, float]
    cf_noise: dict[str, float]
    distance: float
    penalty_residual: float
    per_variable_cdf: dict[str, float]
    steps_used: int

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "lbf_targets": dict(self.lbf_targets),
            "cf_ancestors": dict(self.cf_ancestors),
            "cf_noise": dict(self.cf_noise),
            "distance": self.distance,
            "penalty_residual": self.penalty_residual,
            "per_variable_cdf": dict(self.per_variable_cdf),
            "steps_used": self.steps_used,
        }


class _Plan:
    """Per-(scm, target) precomputation shared by every step and batch row."""

    def __init__(self, scm: Scm, target: str, cfg: FioConfig):
        if target not in scm.graph:
            raise UnknownVariable(f"change target {target!r} not in the graph")
        an = ancestors_including(scm.graph, {target})
        self.target = target
        self.ancestors = [n for n in scm.topo if n in an]  # target is last
        self.free = [n for n in self.ancestors if n != target]
        self.free_index = {n: k for k, n in enumerate(self.free)}
        self.mechs = {}
        for n in self.ancestors:
            mech = scm.mechanisms[n]
            if mech.is_constant:
                raise ConstantMechanism(
                    f"ancestor {n!r} is intervened; cannot optimize over it"
                )
            self.mechs[n] = mech
        if cfg.stats is not None:
            self.sigma = {n: cfg.stats.std[n] for n in self.ancestors}
        else:
            self.sigma = {n: 1.0 for n in self.ancestors}
        if cfg.distance == MECHANISM_CDF:
            self.weights = descendant_weights(scm.graph)
        else:
            self.weights = None


def _evaluate_point(plan: _Plan, cfg: FioConfig, U, fact, want_grad: bool):
    """Loss, distance, penalty, and (optionally) the exact gradient.

    ``U`` has one column per free ancestor, ``fact`` carries per-row factual
    values/noise and the requested target value. All outputs are per-row.
    """
    target = plan.target
    vals: dict[str, np.ndarray] = {}
    dg: dict[str, dict[str, np.ndarray]] = {}
    for j in plan.free:
        mech = plan.mechs[j]
        env = {p: vals[p] for p in mech.parent_order}
        if want_grad:
            gj, dgj = mech.g_value_and_partials(env)
            dg[j] = dgj
        else:
            gj = mech.g_value(env)
        vals[j] = gj + mech.scale * U[:, plan.free_index[j]]

    mech_t = plan.mechs[target]
    env_t = {p: vals[p] for p in mech_t.parent_order}
    if want_grad:
        g_t, dg_t = mech_t.g_value_and_partials(env_t)
    else:
        g_t = mech_t.g_value(env_t)
    u_t = (fact["a_star"] - g_t) / mech_t.scale

    noise_u = {j: U[:, plan.free_index[j]] for j in plan.free}
    noise_u[target] = u_t

    cdf = {}
    sfv = {}
    for j in plan.ancestors:
        nz = plan.mechs[j].noise
        cdf[j] = nz.cdf(noise_u[j])
        sfv[j] = nz.sf(noise_u[j])

    eps = cfg.epsilon
    penalty = 0.0
    for j in plan.ancestors:
        penalty = penalty + np.maximum(eps - cdf[j], 0.0) + np.maximum(eps - sfv[j], 0.0)

    if cfg.distance == ENDOGENOUS_L1:
        dist = np.abs(fact["a_star"] - fact["v"][target]) / plan.sigma[target]
        for j in plan.free:
            dist = dist + np.abs(vals[j] - fact["v"][j]) / plan.sigma[j]
    else:
        dist = 0.0
        for j in plan.ancestors:
            nz = plan.mechs[j].noise
            dist = dist + plan.weights[j] * np.abs(cdf[j] - nz.cdf(fact["u"][j]))

    loss = dist + cfg.w_epsilon * penalty
    if not want_grad:
        return loss, dist, penalty, None, vals, noise_u, cdf

    # Adjoints on the derived noise values: penalty hinges plus, for the
    # mechanism-CDF distance, the distance term itself.
    ubar = {}
    for j in plan.ancestors:
        nz = plan.mechs[j].noise
        pdf_j = nz.pdf(noise_u[j])
        hinge = (sfv[j] < eps).astype(np.float64) - (cdf[j] < eps).astype(np.float64)
        ub = cfg.w_epsilon * pdf_j * hinge
        if cfg.distance == MECHANISM_CDF:
            ub = ub + plan.weights[j] * pdf_j * np.sign(cdf[j] - nz.cdf(fact["u"][j]))
        ubar[j] = ub

    # Adjoints on endogenous ancestor values, then reverse accumulation.
    vbar = {}
    for j in plan.free:
        if cfg.distance == ENDOGENOUS_L1:
            vbar[j] = np.sign(vals[j] - fact["v"][j]) / plan.sigma[j]
        else:
            vbar[j] = np.zeros_like(vals[j])
    scale_t = mech_t.scale
    for p, dpart in dg_t.items():
        vbar[p] = vbar[p] + ubar[target] * (-dpart / scale_t)
    for j in reversed(plan.free):
        for p, dpart in dg[j].items():
            vbar[p] = vbar[p] + vbar[j] * dpart

    grad = np.empty_like(U)
    for j in plan.free:
        grad[:, plan.free_index[j]] = vbar[j] * plan.mechs[j].scale + ubar[j]
    return loss, dist, penalty, grad, vals, noise_u, cdf


def fio_loss(scm: Scm, evidence, change: ChangeRequest, free_noise, cfg: FioConfig):
    """Penalized objective at one point: (loss, gradient over free noise, u*_target).

    The gradient is exact reverse-mode accumulation through the mechanism
    expression trees.
    """
    cfg.validate()
    plan = _Plan(scm, change.target, cfg)
    missing = [j for j in plan.free if j not in free_noise]
    if missing:
        raise MissingValue(f"free noise missing for {missing}")
    fact = _fact_arrays(scm, plan, [evidence], [change.value])
    U = np.array([[float(free_noise[j]) for j in plan.free]], dtype=np.float64)
    if not plan.free:
        U = U.reshape(1, 0)
    loss, _, _, grad, _, noise_u, _ = _evaluate_point(plan, cfg, U, fact, want_grad=True)
    grad_map = {j: float(grad[0, k]) for j, k in plan.free_index.items()}
    return float(loss[0]), grad_map, float(noise_u[plan.target][0])


def _fact_arrays(scm: Scm, plan: _Plan, evidences, a_stars):
    """Columnar factual values/noise; accepts row dicts or a dict of arrays."""
    if isinstance(evidences, dict):
        point = {n: np.asarray(col, dtype=np.float64) for n, col in evidences.items()}
    else:
        B = len(evidences)
        point = {}
        for j in scm.graph.nodes:
            col = np.empty(B)
            for i, ev in enumerate(evidences):
                if j not in ev:
                    raise MissingValue(f"evidence has no value for {j!r}")
                col[i] = ev[j]
            point[j] = col
    noise = abduct_batch(scm, point)
    v = {j: point[j] for j in plan.ancestors}
    u = {j: noise[j] for j in plan.ancestors}
    return {"v": v, "u": u, "a_star": np.asarray(a_stars, dtype=np.float64)}


def solve(scm: Scm, evidence, change: ChangeRequest, cfg: FioConfig) -> FioResult:
    """Run FIO for a single query. Failures surface as status, not exceptions."""
    return solve_batch(scm, [evidence], [change.value], change.target, cfg)[0]


def solve_batch(
    scm: Scm, evidences, a_stars, target: str, cfg: FioConfig
) -> list[FioResult]:
    """Vectorized FIO over independent queries sharing one SCM and target."""
    cfg.validate()
    plan = _Plan(scm, target, cfg)
    fact = _fact_arrays(scm, plan, evidences, a_stars)
    B = fact["a_star"].shape[0]
    d = len(plan.free)

    if d == 0:
        U = np.zeros((B, 0))
        return _finalize(plan, cfg, U, fact, np.zeros(B, dtype=int))

    U_fact = np.column_stack([fact["u"][j] for j in plan.free])
    seeds = np.random.SeedSequence(cfg.seed).spawn(max(cfg.restarts - 1, 0))

    best = None
    for r in range(cfg.restarts):
        if r == 0:
            U0 = U_fact.copy()
        else:
            rng = np.random.Generator(np.random.PCG64(seeds[r - 1]))
            U0 = U_fact + _JITTER_STD * rng.standard_normal(U_fact.shape)
        run = _run_descent(plan, cfg, U0, fact)
        best = run if best is None else _merge_runs(best, run)
        if not bool(np.all(best["seen_feasible"])):
            # Far-tail targets flatten the hinge penalty (its slope carries a
            # normal pdf factor), leaving the factual warm start stuck on a
            # plateau. A penalty-free restoration pass walks the noise into
            # the box first; descent then resumes on the true objective.
            restored = _restore_feasibility(plan, cfg, U0, fact)
            run_b = _run_descent(plan, cfg, restored, fact)
            best = _merge_runs(best, run_b)

    chosen_U = np.where(
        best["seen_feasible"][:, None], best["feas_U"], best["diag_U"]
    )
    return _finalize(plan, cfg, chosen_U, fact, best["stop_step"])


def _run_descent(plan: _Plan, cfg: FioConfig, U0, fact):
    B, d = U0.shape
    U = U0.copy()
    m = np.zeros_like(U)
    v = np.zeros_like(U)
    feas_dist = np.full(B, np.inf)
    feas_U = U0.copy()
    seen_feasible = np.zeros(B, dtype=bool)
    diag_pen = np.full(B, np.inf)
    diag_U = U0.copy()
    best_loss = np.full(B, np.inf)
    last_improve = np.zeros(B, dtype=np.int64)
    stopped = np.zeros(B, dtype=bool)
    stop_step = np.full(B, cfg.steps, dtype=np.int64)
    lr = cfg.learning_rate

    for step in range(cfg.steps):
        loss, dist, pen, grad, _, _, _ = _evaluate_point(plan, cfg, U, fact, True)

        feas = pen == 0.0
        upd = feas & (dist < feas_dist)
        if upd.any():
            feas_dist = np.where(upd, dist, feas_dist)
            feas_U = np.where(upd[:, None], U, feas_U)
        seen_feasible |= feas

        updp = pen < diag_pen
        if updp.any():
            diag_pen = np.where(updp, pen, diag_pen)
            diag_U = np.where(updp[:, None], U, diag_U)

        improved = loss < best_loss - _STALL_TOL
        best_loss = np.minimum(loss, best_loss)
        last_improve = np.where(improved, step, last_improve)
        newly = (~stopped) & (step - last_improve >= _STALL_WINDOW)
        stop_step = np.where(newly, step, stop_step)
        stopped |= newly
        if stopped.all():
            break

        if cfg.optimizer == ADAPTIVE_MOMENT:
            m = _BETA1 * m + (1.0 - _BETA1) * grad
            v = _BETA2 * v + (1.0 - _BETA2) * grad * grad
            t = step + 1
            m_hat = m / (1.0 - _BETA1**t)
            v_hat = v / (1.0 - _BETA2**t)
            delta = lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
        else:
            delta = lr * grad
        U = U - np.where(stopped[:, None], 0.0, delta)

    return {
        "feas_dist": feas_dist,
        "feas_U": feas_U,
        "seen_feasible": seen_feasible,
        "diag_pen": diag_pen,
        "diag_U": diag_U,
        "stop_step": stop_step,
    }


def _restore_feasibility(plan: _Plan, cfg: FioConfig, U0, fact):
    """Pull every ancestor's noise strictly inside the CDF box.

    Minimizes the squared excess of |u| beyond a margin just inside the box
    boundary. Unlike the hinge penalty, this objective keeps a strong
    gradient arbitrarily deep in the tails.
    """
    target = plan.target
    margins = np.array(
        [
            _RESTORE_MARGIN * plan.mechs[j].noise.quantile(1.0 - cfg.epsilon)
            for j in plan.free
        ]
    )
    m_t = _RESTORE_MARGIN * plan.mechs[target].noise.quantile(1.0 - cfg.epsilon)
    U = np.clip(U0, -margins, margins)
    m = np.zeros_like(U)
    v = np.zeros_like(U)
    done = np.zeros(U.shape[0], dtype=bool)
    for step in range(_RESTORE_STEPS):
        vals = {}
        dg = {}
        for j in plan.free:
            mech = plan.mechs[j]
            env = {p: vals[p] for p in mech.parent_order}
            gj, dgj = mech.g_value_and_partials(env)
            dg[j] = dgj
            vals[j] = gj + mech.scale * U[:, plan.free_index[j]]
        mech_t = plan.mechs[target]
        env_t = {p: vals[p] for p in mech_t.parent_order}
        g_t, dg_t = mech_t.g_value_and_partials(env_t)
        u_t = (fact["a_star"] - g_t) / mech_t.scale
        excess = np.maximum(np.abs(u_t) - m_t, 0.0)
        done |= excess == 0.0  # freeze rows as they become strictly feasible
        if done.all():
            break
        ubar_t = 2.0 * excess * np.sign(u_t)
        vbar = {j: np.zeros_like(u_t) for j in plan.free}
        for p, dpart in dg_t.items():
            vbar[p] = vbar[p] + ubar_t * (-dpart / mech_t.scale)
        for j in reversed(plan.free):
            for p, dpart in dg[j].items():
                vbar[p] = vbar[p] + vbar[j] * dpart
        grad = np.empty_like(U)
        for j in plan.free:
            grad[:, plan.free_index[j]] = vbar[j] * plan.mechs[j].scale
        m = _BETA1 * m + (1.0 - _BETA1) * grad
        v = _BETA2 * v + (1.0 - _BETA2) * grad * grad
        t = step + 1
        m_hat = m / (1.0 - _BETA1**t)
        v_hat = v / (1.0 - _BETA2**t)
        delta = _RESTORE_LR * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
        U = np.clip(U - np.where(done[:, None], 0.0, delta), -margins, margins)
    return U


def _merge_runs(a, b):
    """Best of two restarts per row: feasibility first, then distance."""
    b_wins = (b["seen_feasible"] & ~a["seen_feasible"]) | (
        b["seen_feasible"] & a["seen_feasible"] & (b["feas_dist"] < a["feas_dist"])
    )
    b_wins_diag = (~a["seen_feasible"]) & (~b["seen_feasible"]) & (
        b["diag_pen"] < a["diag_pen"]
    )
    col = lambda mask: mask[:, None]
    return {
        "feas_dist": np.where(b_wins, b["feas_dist"], a["feas_dist"]),
        "feas_U": np.where(col(b_wins), b["feas_U"], a["feas_U"]),
        "seen_feasible": a["seen_feasible"] | b["seen_feasible"],
        "diag_pen": np.where(b_wins_diag, b["diag_pen"], a["diag_pen"]),
        "diag_U": np.where(col(b_wins_diag), b["diag_U"], a["diag_U"]),
        "stop_step": np.where(b_wins | b_wins_diag, b["stop_step"], a["stop_step"]),
    }


def _finalize(plan: _Plan, cfg: FioConfig, U, fact, stop_step) -> list[FioResult]:
    _, dist, pen, _, vals, noise_u, cdf = _evaluate_point(
        plan, cfg, U, fact, want_grad=False
    )
    target = plan.target
    mech_t = plan.mechs[target]
    env_t = {p: vals[p] for p in mech_t.parent_order}
    replay = mech_t.g_value(env_t) + mech_t.scale * noise_u[target]
    inv_residual = np.abs(fact["a_star"] - replay)
    feasible = (pen == 0.0) & (inv_residual <= cfg.inversion_tolerance)

    B = U.shape[0]
    results = []
    for i in range(B):
        a_star = float(fact["a_star"][i])
        cf_anc = {j: float(vals[j][i]) for j in plan.free}
        cf_anc[target] = a_star
        cf_noise = {j: float(noise_u[j][i]) for j in plan.ancestors}
        per_cdf = {j: float(cdf[j][i]) for j in plan.ancestors}
        if feasible[i]:
            lbf = {target: a_star}
            for j in plan.free:
                moved = abs(cf_anc[j] - float(fact["v"][j][i])) / plan.sigma[j]
                if moved > cfg.change_tolerance:
                    lbf[j] = cf_anc[j]
            status = FEASIBLE
        else:
            lbf = {}
            status = INFEASIBLE
        results.append(
            FioResult(
                status=status,
                lbf_targets=lbf,
                cf_ancestors=cf_anc,
                cf_noise=cf_noise,
                distance=float(dist[i]) if np.ndim(dist) else float(dist),
                penalty_residual=float(pen[i]),
                per_variable_cdf=per_cdf,
                steps_used=int(stop_step[i]),
            )
        )
    return results


def extract_lbf(evidence, result: FioResult, cfg: FioConfig) -> dict[str, float]:
    """The least-backtracking feasible intervention do(C = c*)."""
    if not result.feasible:
        raise NotFeasible("no LBF intervention for an infeasible query")
    return dict(result.lbf_targets)
