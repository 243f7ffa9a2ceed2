"""Backtracking distance measures and standardization statistics."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidConfig, MissingVariable, ZeroStd

ENDOGENOUS_L1 = "endogenous_l1"
MECHANISM_CDF = "mechanism_cdf"

DISTANCES = (ENDOGENOUS_L1, MECHANISM_CDF)


def check_distance(kind: str) -> str:
    if kind not in DISTANCES:
        raise InvalidConfig(f"unknown distance kind {kind!r}")
    return kind


@dataclass(frozen=True)
class StandardizationStats:
    """Per-variable mean and std used to put endogenous differences on one scale."""

    mean: dict[str, float]
    std: dict[str, float]

    def __post_init__(self):
        for name, s in self.std.items():
            if not s > 0.0:
                raise ZeroStd(f"std of {name!r} must be positive, got {s}")

    @classmethod
    def unit(cls, names) -> "StandardizationStats":
        return cls({n: 0.0 for n in names}, {n: 1.0 for n in names})


def endogenous_l1(an, an_star, stats: StandardizationStats) -> float:
    """Sum of |v* - v| / std over a shared variable set (target included)."""
    if set(an) != set(an_star):
        raise MissingVariable(
            f"assignments cover different variables: {sorted(an)} vs {sorted(an_star)}"
        )
    total = 0.0
    for name in sorted(an):
        if name not in stats.std:
            raise MissingVariable(f"no standardization stats for {name!r}")
        total += abs(an_star[name] - an[name]) / stats.std[name]
    return total


def mechanism_cdf_distance(u, u_star, weights, noise_cdfs) -> float:
    """Descendant-weighted L1 between noise CDFs: sum of w_j |F(u_j) - F(u_j*)|.

    Each summand lies in [0, w_j]; the weights come from
    ``graph.descendant_weights`` so upstream noise shifts cost more.
    """
    if set(u) != set(u_star):
        raise MissingVariable(
            f"noise assignments cover different variables: {sorted(u)} vs {sorted(u_star)}"
        )
    total = 0.0
    for name in sorted(u):
        if name not in weights:
            raise MissingVariable(f"no weight for {name!r}")
        cdf = noise_cdfs[name]
        total += weights[name] * abs(cdf(u[name]) - cdf(u_star[name]))
    return total
