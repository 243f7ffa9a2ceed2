"""Local and global naturalness scores and the epsilon-natural predicate.

Three interchangeable local measures are supported. The two CDF measures
share one code path, so their scores are bit-identical for the additive
monotone mechanisms this package ships (see the docs for when that
equivalence holds in general).
"""

from __future__ import annotations

import math

from .errors import ConstantMechanism, InvalidConfig
from .graph import ancestors_including
from .scm import Assignment, Scm

ENTROPY_NORMALIZED = "entropy_normalized"
EXOGENOUS_CDF = "exogenous_cdf"
CONDITIONAL_CDF = "conditional_cdf"

MEASURES = (ENTROPY_NORMALIZED, EXOGENOUS_CDF, CONDITIONAL_CDF)


def check_measure(measure: str) -> str:
    if measure not in MEASURES:
        raise InvalidConfig(f"unknown naturalness measure {measure!r}")
    return measure


def local_naturalness(measure: str, mech, v: float, pa) -> float:
    """Score of one value under its local mechanism; higher is more natural.

    CDF measures return min(F, 1-F) of the implied noise value, entering the
    tails symmetrically; the entropy-normalized measure returns
    p(v|pa) * exp(H(V|pa)).
    """
    check_measure(measure)
    if getattr(mech, "is_constant", False):
        raise ConstantMechanism("naturalness undefined on an intervened node")
    if measure == ENTROPY_NORMALIZED:
        entropy, logdensity = mech.conditional_entropy_and_logdensity(v, pa)
        return float(math.exp(logdensity + entropy))
    # Exogenous and conditional CDF measures coincide by construction here:
    # F(v|pa) is literally noise.cdf(inverse(pa, v)).
    u_star = mech.inverse(pa, v)
    return float(mech.noise.tail_min(u_star))


def global_naturalness(scm: Scm, point: Assignment, targets, measure: str) -> float:
    """Smallest local score over the targets' ancestral closure."""
    an = ancestors_including(scm.graph, targets)
    best = math.inf
    for name in scm.topo:
        if name not in an:
            continue
        mech = scm.mechanisms[name]
        pa = [point[p] for p in mech.parent_order]
        score = local_naturalness(measure, mech, point[name], pa)
        if score < best:
            best = score
    return best


def is_epsilon_natural(
    scm: Scm, point: Assignment, targets, measure: str, epsilon: float
) -> bool:
    """Strict threshold: a score exactly equal to epsilon does not pass."""
    if measure in (EXOGENOUS_CDF, CONDITIONAL_CDF) and not 0.0 < epsilon < 0.5:
        raise InvalidConfig("epsilon must lie in (0, 0.5) for CDF measures")
    return global_naturalness(scm, point, targets, measure) > epsilon
