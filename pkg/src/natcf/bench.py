"""Toy dataset generators and the MAE / epsilon-ablation harness.

The ground-truth toy models are hand-written three-to-four variable SCMs
with standard-normal noise. Toy 2's published equation self-references the
variable it defines inside the sine; the causal statement ("n1 causes n2")
makes clear the intended argument is n1, and that is what ships here.

Benchmark semantics: the ground truth for a natural query is the true SCM
under the solver's own LBF intervention, because the query is defined by the
chosen intervention. Both methods' errors are reported over the rows whose
natural query is feasible, and both reuse the same per-row counterfactual
target draw.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import GraphMismatch, InvalidConfig
from .estimator import PREFIX, FitConfig, fit_location_scale
from .fio import FioConfig, solve_batch
from .graph import CausalGraph, ancestors_including
from .scm import Scm, abduct_batch, sample
from .mechanisms import parse_mechanism

_TOY_DEFS = {
    1: [
        ("n1", (), "u"),
        ("n2", ("n1",), "-n1 + (1/3)*u"),
        ("n3", ("n1", "n2"), "sin(0.25*pi*(0.5*n2 + n1)) + 0.2*u"),
    ],
    2: [
        ("n1", (), "u"),
        ("n2", ("n1",), "sin(0.2*pi*(n1 + 2.5)) + 0.2*u"),
    ],
    3: [
        ("n1", (), "u"),
        ("n2", ("n1",), "-n1 + (1/3)*u"),
        ("n3", ("n2",), "sin(0.1*pi*(n2 + 2.0)) + 0.2*u"),
        ("n4", ("n1", "n3"), "sin(0.25*pi*(n3 - n1 + 2.0)) + 0.2*u"),
    ],
    4: [
        ("n1", (), "u"),
        ("n2", ("n1",), "-n1 + (1/3)*u"),
        ("n3", ("n2",), "sin(0.3*pi*(n2 + 2.0)) + 0.2*u"),
    ],
}


def toy_scm(k: int) -> Scm:
    if k not in _TOY_DEFS:
        raise InvalidConfig(f"toy id must be 1..4, got {k}")
    defs = _TOY_DEFS[k]
    graph = CausalGraph(tuple(n for n, _, _ in defs), {n: p for n, p, _ in defs})
    mechanisms = {n: parse_mechanism(text, parents) for n, parents, text in defs}
    return Scm(graph, mechanisms)


def gen_toy(k: int, n: int, seed: int) -> tuple[Scm, Dataset, Dataset]:
    """Ground-truth SCM plus disjoint train/test draws of n rows each."""
    scm = toy_scm(k)
    train_seed, test_seed = (
        int(s) for s in np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
    )
    train = sample(scm, n, train_seed)
    test = sample(scm, n, test_seed)
    train.provenance.update({"generator": f"toy{k}", "split": "train", "seed": seed})
    test.provenance.update({"generator": f"toy{k}", "split": "test", "seed": seed})
    return scm, train, test


@dataclass
class BenchReport:
    dataset: str
    change_target: str
    outcomes: tuple[str, ...]
    n_queries: int
    feasible_count: int
    infeasible_count: int
    crosstab: dict[str, int]
    mae: dict[str, dict[str, float]]
    config: dict
    seed: int
    audit: list[dict]
    samples: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "change_target": self.change_target,
            "outcomes": list(self.outcomes),
            "n_queries": self.n_queries,
            "feasible_count": self.feasible_count,
            "infeasible_count": self.infeasible_count,
            "crosstab": dict(self.crosstab),
            "mae": {k: dict(v) for k, v in self.mae.items()},
            "config": dict(self.config),
            "seed": self.seed,
            "audit": list(self.audit),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _draw_targets(test: Dataset, change_target: str, seed: int) -> np.ndarray:
    """One counterfactual target value per row, each off its own PRNG stream."""
    col = test.column(change_target)
    n = test.n_rows
    children = np.random.SeedSequence(seed).spawn(n)
    idx = np.empty(n, dtype=np.int64)
    for i, child in enumerate(children):
        gen = np.random.Generator(np.random.PCG64(child))
        idx[i] = gen.integers(0, n)
    return col[idx].copy()


def _replay_batch(scm: Scm, noise, const_vals, const_mask):
    """Evaluate with per-row constant overrides (a vectorized intervention)."""
    vals = {}
    for name in scm.topo:
        mech = scm.mechanisms[name]
        env = {p: vals[p] for p in mech.parent_order}
        base = mech.g_value(env) + mech.scale * noise[name]
        if name in const_mask:
            vals[name] = np.where(const_mask[name], const_vals[name], base)
        else:
            vals[name] = base
    return vals


def _check_compatible(true_scm: Scm, fitted_scm: Scm) -> None:
    if tuple(true_scm.graph.nodes) != tuple(fitted_scm.graph.nodes):
        raise GraphMismatch(
            f"variable sets differ: {true_scm.graph.nodes} vs {fitted_scm.graph.nodes}"
        )
    if true_scm.topo != fitted_scm.topo:
        raise GraphMismatch("causal orders differ between true and fitted models")


def run_mae(
    true_scm: Scm,
    fitted_scm: Scm,
    test: Dataset,
    change_target: str,
    outcome_vars,
    cfg: FioConfig,
    seed: int,
) -> BenchReport:
    """Per-row natural and non-backtracking queries on the fitted model,
    scored against the true SCM under the same interventions."""
    _check_compatible(true_scm, fitted_scm)
    outcomes = tuple(outcome_vars)
    for o in outcomes:
        if o not in true_scm.graph:
            raise GraphMismatch(f"outcome {o!r} not in the graph")
    n = test.n_rows
    a_star = _draw_targets(test, change_target, seed)
    evidence = test.rows_as_arrays()

    results = solve_batch(fitted_scm, evidence, a_star, change_target, cfg)

    fitted_noise = abduct_batch(fitted_scm, evidence)
    true_noise = abduct_batch(true_scm, evidence)

    # Hard do(target = a*) on both models.
    do_mask = {change_target: np.ones(n, dtype=bool)}
    do_vals = {change_target: a_star}
    nb_pred = _replay_batch(fitted_scm, fitted_noise, do_vals, do_mask)
    nb_truth = _replay_batch(true_scm, true_noise, do_vals, do_mask)

    # The per-row LBF intervention from the fitted solver, applied to both.
    an = ancestors_including(fitted_scm.graph, {change_target})
    moved_names = [v for v in fitted_scm.topo if v in an and v != change_target]
    const_mask = {change_target: np.ones(n, dtype=bool)}
    const_vals = {change_target: a_star}
    for name in moved_names:
        mask = np.zeros(n, dtype=bool)
        vals = np.zeros(n)
        for i, res in enumerate(results):
            if name in res.lbf_targets:
                mask[i] = True
                vals[i] = res.lbf_targets[name]
        const_mask[name] = mask
        const_vals[name] = vals
    nat_pred = _replay_batch(fitted_scm, fitted_noise, const_vals, const_mask)
    nat_truth = _replay_batch(true_scm, true_noise, const_vals, const_mask)

    feasible = np.array([r.feasible for r in results], dtype=bool)
    nb_natural = _do_point_is_natural(fitted_scm, fitted_noise, a_star, change_target, cfg)

    crosstab = {
        "nc1_nb1": int(np.sum(feasible & nb_natural)),
        "nc1_nb0": int(np.sum(feasible & ~nb_natural)),
        "nc0_nb1": int(np.sum(~feasible & nb_natural)),
        "nc0_nb0": int(np.sum(~feasible & ~nb_natural)),
    }

    mae = {}
    n_feas = int(np.sum(feasible))
    for o in outcomes:
        if n_feas:
            nat_err = np.abs(nat_pred[o] - nat_truth[o])[feasible]
            nb_err = np.abs(nb_pred[o] - nb_truth[o])[feasible]
            mae[o] = {
                "natural": math.fsum(nat_err) / n_feas,
                "non_backtracking": math.fsum(nb_err) / n_feas,
            }
        else:
            mae[o] = {"natural": math.nan, "non_backtracking": math.nan}

    audit = []
    for i, res in enumerate(results):
        if not res.feasible:
            audit.append(
                {
                    "row": i,
                    "a_star": float(a_star[i]),
                    "fio": res.to_dict(),
                }
            )

    report = BenchReport(
        dataset=test.provenance.get("generator", "dataset"),
        change_target=change_target,
        outcomes=outcomes,
        n_queries=n,
        feasible_count=n_feas,
        infeasible_count=n - n_feas,
        crosstab=crosstab,
        mae=mae,
        config=_config_echo(cfg),
        seed=seed,
        audit=audit,
    )
    report.samples = {
        "feasible": feasible,
        "a_star": a_star,
        "natural_pred": {o: nat_pred[o] for o in outcomes},
        "natural_truth": {o: nat_truth[o] for o in outcomes},
        "nb_pred": {o: nb_pred[o] for o in outcomes},
        "nb_truth": {o: nb_truth[o] for o in outcomes},
    }
    return report


def _do_point_is_natural(fitted_scm, fitted_noise, a_star, target, cfg) -> np.ndarray:
    """Row mask: does do(target=a*) already satisfy epsilon-natural generation."""
    an = ancestors_including(fitted_scm.graph, {target})
    mech_t = fitted_scm.mechanisms[target]
    vals = {}
    for name in fitted_scm.topo:
        mech = fitted_scm.mechanisms[name]
        env = {p: vals[p] for p in mech.parent_order}
        vals[name] = mech.g_value(env) + mech.scale * fitted_noise[name]
    env_t = {p: vals[p] for p in mech_t.parent_order}
    u_t = (a_star - mech_t.g_value(env_t)) / mech_t.scale
    ok = mech_t.noise.tail_min(u_t) > cfg.epsilon
    for name in an:
        if name == target:
            continue
        nz = fitted_scm.mechanisms[name].noise
        ok &= nz.tail_min(fitted_noise[name]) > cfg.epsilon
    return ok


def _config_echo(cfg: FioConfig) -> dict:
    return {
        "epsilon": cfg.epsilon,
        "w_epsilon": cfg.w_epsilon,
        "learning_rate": cfg.learning_rate,
        "steps": cfg.steps,
        "optimizer": cfg.optimizer,
        "restarts": cfg.restarts,
        "solver_seed": cfg.seed,
        "change_tolerance": cfg.change_tolerance,
        "inversion_tolerance": cfg.inversion_tolerance,
        "distance": cfg.distance,
        "measure": cfg.measure,
    }


def ablate_epsilon(
    true_scm: Scm,
    fitted_scm: Scm,
    test: Dataset,
    change_target: str,
    outcome_vars,
    eps_list,
    cfg: FioConfig,
    seed: int,
) -> list[tuple[float, BenchReport]]:
    """One report per epsilon, all sharing the same query stream."""
    eps_list = [float(e) for e in eps_list]
    if any(b <= a for a, b in zip(eps_list, eps_list[1:])):
        raise InvalidConfig("eps_list must be strictly increasing")
    out = []
    for eps in eps_list:
        cfg_eps = dataclasses.replace(cfg, epsilon=eps)
        report = run_mae(
            true_scm, fitted_scm, test, change_target, outcome_vars, cfg_eps, seed
        )
        out.append((eps, report))
    return out


def fit_for_bench(train: Dataset, graph: CausalGraph, degree: int = 3) -> Scm:
    """The benchmark's deliberately misspecified estimator.

    Prefix conditioning mirrors autoregressive generative models trained in
    the causal order: downstream predictions consume every earlier variable,
    which is what makes hard interventions land them off-support.
    """
    return fit_location_scale(
        train, graph, FitConfig(degree=degree, conditioning=PREFIX)
    )


def format_table(reports) -> str:
    """Aligned plain-text MAE table, one block of columns per report."""
    matrix = [["method"], ["outcome"], ["non_backtracking"], ["natural"]]
    for report in reports:
        for o in report.outcomes:
            matrix[0].append(f"{report.dataset} change({report.change_target})")
            matrix[1].append(o)
            matrix[2].append(f"{report.mae[o]['non_backtracking']:.3f}")
            matrix[3].append(f"{report.mae[o]['natural']:.3f}")
    widths = [max(len(row[c]) for row in matrix) for c in range(len(matrix[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in matrix]
    lines.append(
        "; ".join(
            f"{r.dataset} change({r.change_target}): {r.feasible_count}/{r.n_queries} feasible"
            for r in reports
        )
    )
    return "\n".join(lines)
