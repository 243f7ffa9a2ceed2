"""Assembled structural causal model: evaluation, abduction, sampling, surgery.

Assignments and noise assignments are plain ``{variable: value}`` dicts; the
batched variants used by the solver and samplers hold numpy arrays instead of
scalars, with identical semantics per element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import (
    MissingNoise,
    MissingValue,
    RejectionBudgetExceeded,
    UnknownVariable,
)
from .graph import CausalGraph, topological_order
from .mechanisms import ConstantMech, Mechanism

Assignment = dict[str, float]
NoiseAssignment = dict[str, float]
Intervention = dict[str, float]


@dataclass(frozen=True)
class Scm:
    """Graph plus one mechanism per variable; immutable evaluation engine."""

    graph: CausalGraph
    mechanisms: dict[str, Mechanism]

    def __post_init__(self):
        for n in self.graph.nodes:
            if n not in self.mechanisms:
                raise MissingValue(f"no mechanism for {n!r}")
            mech = self.mechanisms[n]
            if not mech.is_constant and mech.parent_order != self.graph.parents[n]:
                raise UnknownVariable(
                    f"mechanism parents {mech.parent_order} for {n!r} do not "
                    f"match graph parents {self.graph.parents[n]}"
                )
        extra = set(self.mechanisms) - set(self.graph.nodes)
        if extra:
            raise UnknownVariable(f"mechanisms for unknown nodes: {sorted(extra)}")

    @property
    def topo(self):
        return topological_order(self.graph)


def evaluate(scm: Scm, noise: NoiseAssignment) -> Assignment:
    """Walk the topological order, computing v_i = f_i(pa_i, u_i)."""
    values: Assignment = {}
    for n in scm.topo:
        mech = scm.mechanisms[n]
        if mech.is_constant:
            values[n] = mech.value
            continue
        if n not in noise:
            raise MissingNoise(f"no noise value for {n!r}")
        pa = [values[p] for p in mech.parent_order]
        values[n] = float(mech.forward(pa, noise[n]))
    return values


def abduct(scm: Scm, point: Assignment) -> NoiseAssignment:
    """Recover the noise values that reproduce a full observed point."""
    noise: NoiseAssignment = {}
    for n in scm.topo:
        if n not in point:
            raise MissingValue(f"point has no value for {n!r}")
        mech = scm.mechanisms[n]
        if mech.is_constant:
            continue
        pa = [point[p] for p in mech.parent_order]
        noise[n] = float(mech.inverse(pa, point[n]))
    return noise


def intervene(scm: Scm, iv: Intervention) -> Scm:
    """New SCM with each target's mechanism replaced by a constant."""
    if not iv:
        raise UnknownVariable("empty intervention")
    for n in iv:
        if n not in scm.graph:
            raise UnknownVariable(f"intervention target {n!r} not in the graph")
    mechs = dict(scm.mechanisms)
    for n, val in iv.items():
        mechs[n] = ConstantMech(val)
    return Scm(scm.graph, mechs)


def _column_streams(seed: int, n_columns: int):
    """One PCG64 generator per column, split off a single SeedSequence root.

    The (PCG64, SeedSequence.spawn) pair is the package-wide PRNG policy:
    bit-reproducible across platforms, and adding downstream consumers never
    perturbs earlier columns' streams.
    """
    root = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(child)) for child in root.spawn(n_columns)]


def sample(scm: Scm, n: int, seed: int) -> Dataset:
    """n ancestral samples; same seed gives a bit-identical dataset."""
    if n < 1:
        raise MissingValue("need n >= 1 samples")
    order = scm.topo
    streams = _column_streams(seed, len(order))
    noise = {name: streams[i].standard_normal(n) for i, name in enumerate(order)}
    values = evaluate_batch(scm, noise)
    columns = tuple(scm.graph.nodes)
    mat = np.column_stack([values[c] for c in columns])
    return Dataset(columns, mat, provenance={"generator": "ancestral", "seed": seed})


def evaluate_batch(scm: Scm, noise: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Vectorized ``evaluate``: every noise entry is a same-length array."""
    values: dict[str, np.ndarray] = {}
    for nname in scm.topo:
        mech = scm.mechanisms[nname]
        if mech.is_constant:
            some = next(iter(noise.values()))
            values[nname] = np.full(np.shape(some), mech.value)
            continue
        if nname not in noise:
            raise MissingNoise(f"no noise value for {nname!r}")
        env = {p: values[p] for p in mech.parent_order}
        values[nname] = mech.g_value(env) + mech.scale * noise[nname]
    return values


def abduct_batch(scm: Scm, point: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    noise: dict[str, np.ndarray] = {}
    for nname in scm.topo:
        mech = scm.mechanisms[nname]
        if mech.is_constant:
            continue
        if nname not in point:
            raise MissingValue(f"point has no value for {nname!r}")
        env = {p: point[p] for p in mech.parent_order}
        noise[nname] = (point[nname] - mech.g_value(env)) / mech.scale
    return noise


def complete_partial_evidence(
    scm: Scm,
    partial: Assignment,
    seed: int,
    tolerance_band: float = 0.05,
    stats=None,
    max_draws: int = 10**6,
    chunk: int = 8192,
) -> Assignment:
    """Fill in unobserved variables by banded rejection sampling.

    Draws ancestral samples until every evidenced variable falls within
    ``tolerance_band`` standardized units of its evidence, then overwrites the
    evidenced coordinates exactly. ``stats`` supplies the per-variable std;
    when omitted it is estimated from a 4096-sample draw on a derived stream.
    """
    if not partial:
        raise MissingValue("partial evidence is empty")
    for n in partial:
        if n not in scm.graph:
            raise UnknownVariable(f"evidence variable {n!r} not in the graph")
    nodes = list(scm.graph.nodes)
    if len(partial) == len(nodes):
        return dict(partial)

    root = np.random.SeedSequence(seed)
    calib_seq, draw_seq = root.spawn(2)
    if stats is not None:
        stds = {n: stats.std[n] for n in partial}
    else:
        calib = sample(scm, 4096, _seq_to_seed(calib_seq))
        stds = {n: max(float(np.std(calib.column(n))), 1e-12) for n in partial}

    evidenced = sorted(partial)
    order = scm.topo
    drawn = 0
    stream_root = draw_seq
    while drawn < max_draws:
        m = min(chunk, max_draws - drawn)
        children = stream_root.spawn(len(order) + 1)
        stream_root = children[-1]
        noise = {
            name: np.random.Generator(np.random.PCG64(children[i])).standard_normal(m)
            for i, name in enumerate(order)
        }
        values = evaluate_batch(scm, noise)
        ok = np.ones(m, dtype=bool)
        for n in evidenced:
            ok &= np.abs(values[n] - partial[n]) <= tolerance_band * stds[n]
        hits = np.nonzero(ok)[0]
        if hits.size:
            i = int(hits[0])
            out = {n: float(values[n][i]) for n in nodes}
            out.update(partial)
            return out
        drawn += m
    raise RejectionBudgetExceeded(
        f"no sample within band {tolerance_band} after {max_draws} draws; "
        "evidence lies in a near-zero-density region"
    )


def _seq_to_seed(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, dtype=np.uint64)[0])
