"""End-to-end counterfactual queries: non-backtracking and natural."""

from __future__ import annotations

from dataclasses import dataclass

from .fio import ChangeRequest, FioConfig, FioResult, extract_lbf, solve
from .scm import Assignment, Scm, abduct, evaluate, intervene

NON_BACKTRACKING = "non_backtracking"
NATURAL = "natural"


@dataclass
class CounterfactualAnswer:
    """One counterfactual world.

    ``point`` is None exactly when a natural query came back infeasible; the
    attached ``fio`` result then carries the diagnostics.
    """

    kind: str
    point: Assignment | None
    fio: FioResult | None = None

    @property
    def feasible(self) -> bool:
        return self.point is not None


def nonbacktracking_cf(scm: Scm, evidence: Assignment, change: ChangeRequest) -> CounterfactualAnswer:
    """Abduct, intervene on the target alone, evaluate."""
    noise = abduct(scm, evidence)
    mutilated = intervene(scm, {change.target: change.value})
    return CounterfactualAnswer(NON_BACKTRACKING, evaluate(mutilated, noise))


def natural_cf(
    scm: Scm, evidence: Assignment, change: ChangeRequest, cfg: FioConfig
) -> CounterfactualAnswer:
    """Least-backtracking feasible intervention, then Pearl-style evaluation.

    Variables outside the intervention set keep their abducted factual noise,
    so the answer differs from the non-backtracking one only through which
    variables are intervened. Infeasibility is data, not an exception.
    """
    result = solve(scm, evidence, change, cfg)
    if not result.feasible:
        return CounterfactualAnswer(NATURAL, None, fio=result)
    iv = extract_lbf(evidence, result, cfg)
    noise = abduct(scm, evidence)
    point = evaluate(intervene(scm, iv), noise)
    return CounterfactualAnswer(NATURAL, point, fio=result)
