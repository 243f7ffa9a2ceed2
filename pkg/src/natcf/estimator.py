"""Fit an invertible location-scale SCM from data and a known graph.

Each variable gets v = m(inputs) + s*u with m a ridge-regularized polynomial
(optionally plus fixed-frequency sine features) and s the residual standard
deviation, so the fitted model stays strictly monotone in its noise and
exactly invertible.

Two conditioning modes exist: ``parents`` regresses each variable on its
graph parents; ``prefix`` regresses on all predecessors in the causal order,
which is how autoregressive generative models consume the same graph. The
benchmark uses ``prefix`` (see bench module).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .distance import StandardizationStats
from .errors import InsufficientData, InvalidConfig, RankDeficient, ZeroStd
from .expressions import Add, Const, Mul, Node, Par, Sin
from .graph import CausalGraph, topological_order
from .mechanisms import Mechanism
from .scm import Scm

PARENTS = "parents"
PREFIX = "prefix"


@dataclass(frozen=True)
class FitConfig:
    degree: int = 3
    ridge: float = 1e-6
    sin_frequencies: tuple[float, ...] = ()
    conditioning: str = PARENTS

    def validate(self) -> "FitConfig":
        if self.degree < 1:
            raise InvalidConfig("polynomial degree must be >= 1")
        if self.ridge < 0:
            raise InvalidConfig("ridge must be nonnegative")
        if self.conditioning not in (PARENTS, PREFIX):
            raise InvalidConfig(f"unknown conditioning {self.conditioning!r}")
        return self


def column_stats(data: Dataset) -> StandardizationStats:
    """Per-column mean and population std (floor 1e-12)."""
    if data.n_rows < 2:
        raise InsufficientData("need at least 2 rows for stats")
    mean = {}
    std = {}
    for name in data.columns:
        col = data.column(name)
        mean[name] = float(np.mean(col))
        s = float(np.std(col))
        if s < 1e-12:
            raise ZeroStd(f"column {name!r} is constant")
        std[name] = s
    return StandardizationStats(mean, std)


def _monomial_powers(n_inputs: int, degree: int):
    """All exponent tuples with 1 <= total degree <= degree."""
    out = []
    for total in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(n_inputs), total):
            powers = [0] * n_inputs
            for idx in combo:
                powers[idx] += 1
            out.append(tuple(powers))
    return out


def _design(cols: list[np.ndarray], powers, sin_frequencies):
    n = cols[0].shape[0] if cols else 0
    feats = [np.ones(n)]
    for p in powers:
        f = np.ones(n)
        for x, e in zip(cols, p):
            if e:
                f = f * x**e
        feats.append(f)
    for freq in sin_frequencies:
        for x in cols:
            feats.append(np.sin(freq * x))
    return np.column_stack(feats)


def _basis_terms(inputs, powers, sin_frequencies):
    """Expression-tree factories matching the _design feature order."""
    terms: list[Node] = [Const(1.0)]
    for p in powers:
        node = None
        for name, e in zip(inputs, p):
            for _ in range(e):
                node = Par(name) if node is None else Mul(node, Par(name))
        terms.append(node)
    for freq in sin_frequencies:
        for name in inputs:
            terms.append(Sin(Mul(Const(freq), Par(name))))
    return terms


def fit_location_scale(data: Dataset, graph: CausalGraph, cfg: FitConfig = FitConfig()) -> Scm:
    """Per-variable ridge regression on the basis expansion; s = residual std."""
    cfg.validate()
    if set(data.columns) != set(graph.nodes):
        raise InsufficientData(
            f"dataset columns {sorted(data.columns)} do not match graph nodes "
            f"{sorted(graph.nodes)}"
        )
    order = topological_order(graph)
    mechanisms = {}
    fitted_parents = {}
    for pos, name in enumerate(order):
        if cfg.conditioning == PARENTS:
            inputs = list(graph.parents[name])
        else:
            inputs = list(order[:pos])
        fitted_parents[name] = tuple(inputs)
        y = data.column(name)
        if not inputs:
            m = float(np.mean(y))
            s = float(np.std(y))
            if s < 1e-12:
                raise ZeroStd(f"variable {name!r} is constant in the data")
            mechanisms[name] = Mechanism(Const(m), s, ())
            continue
        powers = _monomial_powers(len(inputs), cfg.degree)
        cols = [data.column(p) for p in inputs]
        X = _design(cols, powers, cfg.sin_frequencies)
        n, k = X.shape
        if n < 10 * k:
            raise InsufficientData(
                f"{name!r}: {n} rows for {k} features (need >= {10 * k})"
            )
        gram = X.T @ X + cfg.ridge * np.eye(k)
        try:
            beta = np.linalg.solve(gram, X.T @ y)
        except np.linalg.LinAlgError as err:
            raise RankDeficient(f"{name!r}: {err}") from None
        if not np.all(np.isfinite(beta)):
            raise RankDeficient(f"{name!r}: non-finite coefficients")
        resid = y - X @ beta
        s = float(np.sqrt(np.mean(resid**2)))
        if s < 1e-12:
            raise ZeroStd(f"{name!r}: residuals vanish; noise scale undefined")
        terms = _basis_terms(inputs, powers, cfg.sin_frequencies)
        g: Node = Const(float(beta[0]))
        for coef, term in zip(beta[1:], terms[1:]):
            g = Add(g, Mul(Const(float(coef)), term))
        mechanisms[name] = Mechanism(g, s, tuple(inputs))

    if cfg.conditioning == PARENTS:
        fitted_graph = graph
    else:
        fitted_graph = CausalGraph(graph.nodes, fitted_parents)
    return Scm(fitted_graph, mechanisms)
