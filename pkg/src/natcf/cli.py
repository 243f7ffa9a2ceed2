"""Command-line front door.

Subcommands: generate, fit, query, bench, ablate, verify. Every option can
also be supplied through a JSON experiment-spec file (--spec); explicit
flags override file values. Exit codes: 0 success, 1 infeasible single
query, 2 usage/config error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import figures
from .data import read_csv, write_csv
from .distance import ENDOGENOUS_L1
from .engine import natural_cf, nonbacktracking_cf
from .errors import InvalidConfig, NatcfError
from .estimator import FitConfig, column_stats, fit_location_scale
from .fio import ChangeRequest, FioConfig, fio_loss, solve_batch
from .graph import ancestors_including
from .naturalness import CONDITIONAL_CDF
from .oracle import GridSpec, grid_solve
from .scm import complete_partial_evidence, sample
from .specfile import read_scm, write_scm

_CONFIG_ERRORS = (InvalidConfig,)


def worker_count() -> int:
    """Worker cap from NATCF_THREADS (0 or unset = auto)."""
    raw = os.environ.get("NATCF_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidConfig(f"NATCF_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise InvalidConfig("NATCF_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


_SOLVER_DEFAULTS = {
    "eps": 1e-4,
    "w_eps": 1e4,
    "lr": 1e-3,
    "steps": 50_000,
    "optimizer": "adaptive_moment",
    "restarts": 1,
    "solver_seed": 0,
    "change_tol": 1e-6,
    "inv_tol": 1e-8,
    "distance": ENDOGENOUS_L1,
    "measure": CONDITIONAL_CDF,
}

_DEFAULTS = {
    "generate": {"toy": 1, "n": 10_000, "seed": 0, "out": "train.csv,test.csv", "scm_out": None},
    "fit": {
        "data": None, "toy": None, "graph": None, "out": "fitted.scm",
        "degree": 3, "ridge": 1e-6, "conditioning": "parents", "sin_freqs": None,
    },
    "query": {
        "scm": None, "evidence": None, "row": 0, "change": None, "mode": "natural",
        "stats_from": None, "band": 0.05, "complete_seed": 0,
        "out_dir": None, "figures": False, **_SOLVER_DEFAULTS,
    },
    "bench": {
        "toy": 1, "n": 10_000, "seed": 0, "change": "n2", "outcomes": "n3",
        "degree": 3, "conditioning": "prefix", "out_dir": None, "figures": False,
        **_SOLVER_DEFAULTS,
    },
    "ablate": {
        "toy": 1, "n": 10_000, "seed": 0, "change": "n2", "outcomes": "n3",
        "degree": 3, "conditioning": "prefix", "eps_list": "1e-4,1e-3,1e-2",
        "out_dir": None, "figures": False, **_SOLVER_DEFAULTS,
    },
    "verify": {
        "toy": 2, "cases": 200, "seed": 1, "change": "n2", "resolution": 401,
        "agreement": 0.99, "distance_slack": 1e-3, **_SOLVER_DEFAULTS,
        "eps": 1e-2, "restarts": 8,
    },
}


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, default=None, help="naturalness threshold")
    p.add_argument("--w-eps", type=float, default=None, dest="w_eps")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--optimizer", default=None, choices=["adaptive_moment", "plain_gd"])
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--solver-seed", type=int, default=None, dest="solver_seed")
    p.add_argument("--change-tol", type=float, default=None, dest="change_tol")
    p.add_argument("--inv-tol", type=float, default=None, dest="inv_tol")
    p.add_argument("--distance", default=None, choices=["endogenous_l1", "mechanism_cdf"])
    p.add_argument("--measure", default=None,
                   choices=["entropy_normalized", "exogenous_cdf", "conditional_cdf"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="natcf")
    parser.add_argument("--spec", default=None, help="JSON experiment-spec file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write toy train/test CSVs")
    p.add_argument("--toy", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="train.csv,test.csv")
    p.add_argument("--scm-out", default=None, dest="scm_out", help="also write the true SCM")

    p = sub.add_parser("fit", help="fit a location-scale SCM from a dataset")
    p.add_argument("--data", default=None)
    p.add_argument("--toy", type=int, default=None, help="take the graph from a toy model")
    p.add_argument("--graph", default=None, help="take the graph from an SCM spec file")
    p.add_argument("--out", default=None)
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--conditioning", default=None, choices=["parents", "prefix"])
    p.add_argument("--sin-freqs", default=None, dest="sin_freqs", help="comma-separated")

    p = sub.add_parser("query", help="answer one counterfactual query")
    p.add_argument("--scm", default=None)
    p.add_argument("--evidence", default=None, help="CSV with a header row")
    p.add_argument("--row", type=int, default=None)
    p.add_argument("--change", default=None, help="var=value")
    p.add_argument("--mode", default=None, choices=["natural", "do"])
    p.add_argument("--stats-from", default=None, dest="stats_from",
                   help="CSV used for standardization stats")
    p.add_argument("--band", type=float, default=None,
                   help="rejection band for partial evidence")
    p.add_argument("--complete-seed", type=int, default=None, dest="complete_seed")
    p.add_argument("--out-dir", default=None, dest="out_dir")
    p.add_argument("--figures", action="store_const", const=True, default=None)
    _add_solver_flags(p)

    p = sub.add_parser("bench", help="Table-1 style MAE report on a toy")
    p.add_argument("--toy", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--change", default=None)
    p.add_argument("--outcomes", default=None, help="comma-separated")
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--conditioning", default=None, choices=["parents", "prefix"])
    p.add_argument("--out-dir", default=None, dest="out_dir")
    p.add_argument("--figures", action="store_const", const=True, default=None)
    _add_solver_flags(p)

    p = sub.add_parser("ablate", help="epsilon sweep of the bench")
    p.add_argument("--toy", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--change", default=None)
    p.add_argument("--outcomes", default=None)
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--conditioning", default=None, choices=["parents", "prefix"])
    p.add_argument("--eps-list", default=None, dest="eps_list")
    p.add_argument("--out-dir", default=None, dest="out_dir")
    p.add_argument("--figures", action="store_const", const=True, default=None)
    _add_solver_flags(p)

    p = sub.add_parser("verify", help="solver-vs-oracle agreement suite")
    p.add_argument("--toy", type=int, default=None)
    p.add_argument("--cases", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--change", default=None)
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--agreement", type=float, default=None)
    p.add_argument("--distance-slack", type=float, default=None, dest="distance_slack")
    _add_solver_flags(p)

    return parser


def _merge_options(args: argparse.Namespace) -> dict:
    spec = {}
    if args.spec:
        with open(args.spec) as fh:
            spec = json.load(fh)
        if not isinstance(spec, dict):
            raise InvalidConfig(f"{args.spec}: experiment spec must be a JSON object")
    merged = {}
    for key, default in _DEFAULTS[args.command].items():
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
        elif key in spec:
            merged[key] = spec[key]
        else:
            merged[key] = default
    return merged


def _solver_config(opt: dict, stats=None) -> FioConfig:
    return FioConfig(
        epsilon=float(opt["eps"]),
        w_epsilon=float(opt["w_eps"]),
        learning_rate=float(opt["lr"]),
        steps=int(opt["steps"]),
        optimizer=opt["optimizer"],
        restarts=int(opt["restarts"]),
        seed=int(opt["solver_seed"]),
        change_tolerance=float(opt["change_tol"]),
        inversion_tolerance=float(opt["inv_tol"]),
        distance=opt["distance"],
        measure=opt["measure"],
        stats=stats,
    ).validate()


def _csv_list(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _fmt_assignment(a: dict) -> str:
    return ", ".join(f"{k}={a[k]:.6g}" for k in a)


def cmd_generate(opt: dict) -> int:
    paths = _csv_list(opt["out"])
    if len(paths) != 2:
        raise InvalidConfig("--out needs two comma-separated paths (train,test)")
    scm, train, test = bench_mod.gen_toy(int(opt["toy"]), int(opt["n"]), int(opt["seed"]))
    write_csv(train, paths[0])
    write_csv(test, paths[1])
    if opt["scm_out"]:
        write_scm(scm, opt["scm_out"])
    print(f"wrote {paths[0]} and {paths[1]} (toy {opt['toy']}, n={opt['n']}, seed={opt['seed']})")
    return 0


def cmd_fit(opt: dict) -> int:
    if not opt["data"]:
        raise InvalidConfig("fit needs --data")
    data = read_csv(opt["data"])
    if opt["graph"]:
        graph = read_scm(opt["graph"]).graph
    elif opt["toy"]:
        graph = bench_mod.toy_scm(int(opt["toy"])).graph
    else:
        raise InvalidConfig("fit needs --graph or --toy for the causal graph")
    freqs = tuple(float(f) for f in _csv_list(opt["sin_freqs"])) if opt["sin_freqs"] else ()
    cfg = FitConfig(
        degree=int(opt["degree"]),
        ridge=float(opt["ridge"]),
        sin_frequencies=freqs,
        conditioning=opt["conditioning"],
    )
    fitted = fit_location_scale(data, graph, cfg)
    write_scm(fitted, opt["out"])
    print(f"wrote {opt['out']} ({opt['conditioning']} conditioning, degree {opt['degree']})")
    return 0


def _parse_change(raw) -> ChangeRequest:
    if not raw or "=" not in str(raw):
        raise InvalidConfig("--change must look like var=value")
    name, _, value = str(raw).partition("=")
    try:
        return ChangeRequest(name.strip(), float(value))
    except ValueError:
        raise InvalidConfig(f"bad change value in {raw!r}") from None


def cmd_query(opt: dict) -> int:
    if not opt["scm"] or not opt["evidence"] or not opt["change"]:
        raise InvalidConfig("query needs --scm, --evidence and --change")
    scm = read_scm(opt["scm"])
    table = read_csv(opt["evidence"])
    row = table.row(int(opt["row"]))
    stats = column_stats(read_csv(opt["stats_from"])) if opt["stats_from"] else None

    evidence = {k: v for k, v in row.items() if k in scm.graph.parents}
    if set(evidence) != set(scm.graph.nodes):
        evidence = complete_partial_evidence(
            scm,
            evidence,
            seed=int(opt["complete_seed"]),
            tolerance_band=float(opt["band"]),
            stats=stats,
        )
        print("evidence completed by rejection sampling:")
        print(f"  {_fmt_assignment(evidence)}")

    change = _parse_change(opt["change"])
    lines = [
        f"mode: {opt['mode']}",
        f"evidence: {_fmt_assignment(evidence)}",
        f"change: {change.target} = {change.value:.6g}",
    ]
    payload = {
        "mode": opt["mode"],
        "evidence": evidence,
        "change": {"target": change.target, "value": change.value},
    }
    exit_code = 0
    nb = nonbacktracking_cf(scm, evidence, change)
    if opt["mode"] == "do":
        lines.append(f"counterfactual: {_fmt_assignment(nb.point)}")
        payload["point"] = nb.point
        answer_point = nb.point
        nat_point = None
    else:
        cfg = _solver_config(opt, stats=stats)
        answer = natural_cf(scm, evidence, change, cfg)
        fio = answer.fio
        payload["fio"] = fio.to_dict()
        lines.append(f"status: {fio.status}")
        if answer.feasible:
            lines.append(f"lbf_intervention: {_fmt_assignment(fio.lbf_targets)}")
            lines.append(f"counterfactual: {_fmt_assignment(answer.point)}")
            payload["point"] = answer.point
        else:
            lines.append("no feasible intervention; diagnostics follow")
            exit_code = 1
        lines.append(f"distance: {fio.distance:.6g}")
        lines.append(f"penalty_residual: {fio.penalty_residual:.6g}")
        cdfs = ", ".join(f"{k}={v:.4g}" for k, v in sorted(fio.per_variable_cdf.items()))
        lines.append(f"per_variable_cdf: {cdfs}")
        lines.append(f"steps_used: {fio.steps_used}")
        answer_point = answer.point
        nat_point = answer.point

    print("\n".join(lines))
    if opt["out_dir"]:
        out = Path(opt["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "query.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        if opt["figures"]:
            _query_figure(scm, evidence, change, nb.point, nat_point, out / "query_support.png")
        print(f"report written to {out}")
    return exit_code


def _query_figure(scm, evidence, change, nb_point, nat_point, path) -> None:
    an = ancestors_including(scm.graph, {change.target})
    others = [v for v in scm.topo if v in an and v != change.target]
    if not others:
        return
    if nat_point is not None:
        partner = max(others, key=lambda v: abs(nat_point[v] - evidence[v]))
    else:
        partner = others[-1]
    support = sample(scm, 4000, 20_240_817)
    figures.save_query_support(
        (support.column(partner), support.column(change.target)),
        (partner, change.target),
        evidence,
        nb_point,
        nat_point,
        path,
    )


def _bench_pipeline(opt: dict):
    toy = int(opt["toy"])
    seed = int(opt["seed"])
    true_scm, train, test = bench_mod.gen_toy(toy, int(opt["n"]), seed)
    fit_cfg = FitConfig(degree=int(opt["degree"]), conditioning=opt["conditioning"])
    fitted = fit_location_scale(train, true_scm.graph, fit_cfg)
    stats = column_stats(train)
    cfg = _solver_config(opt, stats=stats)
    outcomes = _csv_list(opt["outcomes"])
    return true_scm, fitted, test, cfg, outcomes, seed


def cmd_bench(opt: dict) -> int:
    true_scm, fitted, test, cfg, outcomes, seed = _bench_pipeline(opt)
    report = bench_mod.run_mae(
        true_scm, fitted, test, opt["change"], outcomes, cfg, seed
    )
    print(bench_mod.format_table([report]))
    if opt["out_dir"]:
        out = Path(opt["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json() + "\n")
        _write_mae_csv([report], out / "mae.csv")
        _write_audit_csv(report, out / "audit.csv")
        if opt["figures"]:
            figures.save_mae_bars(report, out / "mae_bars.png")
            for o in report.outcomes:
                figures.save_truth_scatter(report, o, out / f"scatter_{o}.png")
        print(f"report written to {out}")
    return 0


def cmd_ablate(opt: dict) -> int:
    true_scm, fitted, test, cfg, outcomes, seed = _bench_pipeline(opt)
    eps_list = [float(e) for e in _csv_list(opt["eps_list"])]
    sweep = bench_mod.ablate_epsilon(
        true_scm, fitted, test, opt["change"], outcomes, eps_list, cfg, seed
    )
    for eps, report in sweep:
        print(f"epsilon={eps:g}: infeasible={report.infeasible_count}/{report.n_queries}")
        print(bench_mod.format_table([report]))
    if opt["out_dir"]:
        out = Path(opt["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        payload = [{"epsilon": eps, "report": r.to_dict()} for eps, r in sweep]
        (out / "ablation.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        with open(out / "ablation.csv", "w") as fh:
            fh.write("epsilon,feasible,infeasible," + ",".join(
                f"mae_nb_{o},mae_natural_{o}" for o in outcomes) + "\n")
            for eps, r in sweep:
                cells = [f"{eps:g}", str(r.feasible_count), str(r.infeasible_count)]
                for o in outcomes:
                    cells.append(f"{r.mae[o]['non_backtracking']:.6g}")
                    cells.append(f"{r.mae[o]['natural']:.6g}")
                fh.write(",".join(cells) + "\n")
        if opt["figures"]:
            figures.save_ablation(sweep, outcomes, out / "ablation.png")
        print(f"report written to {out}")
    return 0


def _write_mae_csv(reports, path) -> None:
    with open(path, "w") as fh:
        fh.write("dataset,change_target,outcome,method,mae,feasible,n_queries\n")
        for r in reports:
            for o in r.outcomes:
                for method in ("non_backtracking", "natural"):
                    fh.write(
                        f"{r.dataset},{r.change_target},{o},{method},"
                        f"{r.mae[o][method]:.10g},{r.feasible_count},{r.n_queries}\n"
                    )


def _write_audit_csv(report, path) -> None:
    with open(path, "w") as fh:
        fh.write("row,a_star,status,penalty_residual,distance,steps_used\n")
        for entry in report.audit:
            fio = entry["fio"]
            fh.write(
                f"{entry['row']},{entry['a_star']:.10g},{fio['status']},"
                f"{fio['penalty_residual']:.10g},{fio['distance']:.10g},{fio['steps_used']}\n"
            )


def cmd_verify(opt: dict) -> int:
    toy = int(opt["toy"])
    cases = int(opt["cases"])
    seed = int(opt["seed"])
    target = opt["change"]
    scm = bench_mod.toy_scm(toy)
    seeds = np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
    evidence_table = sample(scm, cases, int(seeds[0]))
    a_star = sample(scm, cases, int(seeds[1])).column(target)
    stats = column_stats(evidence_table)
    cfg = _solver_config(opt, stats=stats)
    grid = GridSpec(resolution=int(opt["resolution"]))

    solved = solve_batch(scm, evidence_table.rows_as_arrays(), a_star, target, cfg)
    rows = [evidence_table.row(i) for i in range(cases)]

    def run_oracle(i):
        return grid_solve(scm, rows[i], ChangeRequest(target, float(a_star[i])), cfg, grid)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        oracled = list(pool.map(run_oracle, range(cases)))

    spacing = grid_spacing(scm, target, cfg, grid)
    agree = 0
    both = 0
    max_gap = 0.0
    worst = None
    failed = 0
    for i in range(cases):
        s, o = solved[i], oracled[i]
        if s.feasible == o.feasible:
            agree += 1
        if s.feasible and o.feasible:
            both += 1
            change = ChangeRequest(target, float(a_star[i]))
            bound = float(opt["distance_slack"]) + cell_bound(
                scm, rows[i], change, cfg, spacing, (s, o)
            )
            gap = abs(s.distance - o.distance)
            if gap > max_gap:
                max_gap, worst = gap, i
            if gap > bound:
                failed += 1
                print(
                    f"case {i}: distance gap {gap:.6g} exceeds bound {bound:.6g}",
                    file=sys.stderr,
                )
    rate = agree / cases
    print(
        f"toy {toy} change({target}): agreement {agree}/{cases} ({rate:.1%}), "
        f"both feasible {both}, max distance gap {max_gap:.3g}"
        + (f" (case {worst})" if worst is not None else "")
    )
    if failed:
        print(f"{failed} distance checks failed", file=sys.stderr)
        return 1
    if rate < float(opt["agreement"]):
        print(f"agreement below threshold {opt['agreement']}", file=sys.stderr)
        return 1
    return 0


def grid_spacing(scm, target, cfg, grid) -> dict[str, float]:
    """Grid step per free dimension of the oracle box."""
    free_names = [
        v for v in scm.topo
        if v in ancestors_including(scm.graph, {target}) and v != target
    ]
    spacing = {}
    for name in free_names:
        nz = scm.mechanisms[name].noise
        width = nz.quantile(1 - cfg.epsilon) - nz.quantile(cfg.epsilon)
        spacing[name] = width / (grid.resolution - 1)
    return spacing


def cell_bound(scm, evidence, change, cfg, spacing, results) -> float:
    """One grid cell's worth of distance variation, from local slopes.

    At an exactly feasible point the penalty hinges are inactive, so the
    fio_loss gradient there is the pure distance slope; the per-variable
    scale/std ratio floors the estimate against sitting exactly on a kink.
    """
    slopes = {name: [scm.mechanisms[name].scale / _sigma(cfg, name)] for name in spacing}
    for res in results:
        free = {k: res.cf_noise[k] for k in spacing}
        _, grad, _ = fio_loss(scm, evidence, change, free, cfg)
        for name in spacing:
            slopes[name].append(abs(grad.get(name, 0.0)))
    return sum(2.0 * h * max(slopes[name]) for name, h in spacing.items())


def _sigma(cfg, name) -> float:
    return cfg.stats.std[name] if cfg.stats is not None else 1.0


_COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "query": cmd_query,
    "bench": cmd_bench,
    "ablate": cmd_ablate,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opt = _merge_options(args)
        return _COMMANDS[args.command](opt)
    except _CONFIG_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (NatcfError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
