"""Genetic search over intention vectors with a causal-surrogate fitness.

Evaluating a candidate prompt-rephrasing selection for real would require
regenerating and re-judging code.  Instead, a linear structural model is
fitted once per graph node from its parents; a candidate's fitness is the
model-implied expectation of the objective metric under do(M = candidate),
computed by forward propagation in topological order with exogenous
non-meta roots held at their sample means.  The search itself is a plain
elitist GA: binary chromosomes, two-point crossover, per-bit mutation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from promptcausal.codemetrics.aggregate import METRIC_DIRECTIONS
from promptcausal.dataset import ObservationMatrix
from promptcausal.errors import LengthMismatch, UnknownMetric
from promptcausal.graph import CausalGraph
from promptcausal.intentions import Intention, IntentionVector

__all__ = [
    "GaConfig",
    "GenerationStats",
    "SearchTrace",
    "LinearSurrogate",
    "surrogate_fitness",
    "crossover",
    "mutate",
    "optimize",
]


@dataclass(frozen=True)
class GaConfig:
    population: int = 20
    generations: int = 30
    survivors: int = 5
    mutation_rate: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.survivors <= self.population:
            raise ValueError("survivors must satisfy 1 <= survivors <= population")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")


@dataclass(frozen=True)
class GenerationStats:
    index: int
    best_vector: IntentionVector
    best_fitness: float
    mean_fitness: float


@dataclass(frozen=True)
class SearchTrace:
    generations: Tuple[GenerationStats, ...]

    def best_fitness_series(self) -> List[float]:
        return [g.best_fitness for g in self.generations]


# ---------------------------------------------------------------------------
# Surrogate
# ---------------------------------------------------------------------------


class LinearSurrogate:
    """Per-node linear structural model fitted from graph parents.

    Fitting happens once at construction; evaluation is a topological
    forward pass and costs microseconds per candidate.
    """

    def __init__(self, graph: CausalGraph, m: ObservationMatrix):
        self.graph = graph
        self.schema = m.schema
        self._order = graph.topological_order()
        self._means = {name: float(m.column(name).mean()) for name in m.schema.all_names()}
        self._models: Dict[str, Tuple[float, Tuple[str, ...], np.ndarray]] = {}
        for node in self._order:
            parents = tuple(sorted(graph.parents(node)))
            if not parents:
                continue
            X = np.column_stack([m.column(p) for p in parents])
            X1 = np.column_stack([np.ones(m.n_rows), X])
            y = m.column(node)
            beta, *_ = np.linalg.lstsq(X1, y, rcond=None)
            self._models[node] = (float(beta[0]), parents, beta[1:])

    def expected(self, selection: IntentionVector, objective: str) -> float:
        """E[objective | do(meta = selection bits)] under the fitted model."""
        meta_names = self.schema.meta_names
        if len(selection.bits) != len(meta_names):
            raise LengthMismatch(
                f"vector length {len(selection.bits)} != {len(meta_names)} meta variables"
            )
        do = {name: float(bit) for name, bit in zip(meta_names, selection.bits)}
        values: Dict[str, float] = {}
        for node in self._order:
            if self.schema.tier_of(node) == "M":
                values[node] = do[node]
            elif node in self._models:
                intercept, parents, coefs = self._models[node]
                values[node] = intercept + float(
                    sum(c * values[p] for p, c in zip(parents, coefs))
                )
            else:
                values[node] = self._means[node]
        if objective in values:
            return values[objective]
        # Objective dropped from the graph as isolated: constant baseline.
        return self._means[objective]


def surrogate_fitness(
    selection: IntentionVector,
    graph: CausalGraph,
    m: ObservationMatrix,
    objective: str,
    surrogate: Optional[LinearSurrogate] = None,
) -> float:
    """Model-implied expectation of ``objective`` under do(M = selection).

    Pass a prebuilt :class:`LinearSurrogate` when scoring many candidates.
    Raises :class:`UnknownMetric` for an objective that is neither a metric
    column nor a C-tier graph node.
    """
    known = objective in m.schema.metric_names or (
        objective in graph.tiers and graph.tiers[objective] == "C"
    )
    if not known:
        raise UnknownMetric(objective)
    if surrogate is None:
        surrogate = LinearSurrogate(graph, m)
    return surrogate.expected(selection, objective)


# ---------------------------------------------------------------------------
# GA operators
# ---------------------------------------------------------------------------


def crossover(
    a: IntentionVector, b: IntentionVector, rng: np.random.Generator
) -> Tuple[IntentionVector, IntentionVector]:
    """Two-point crossover: swap the inclusive segment [i..j] between parents.

    Cut points i < j are drawn uniformly over positions.  The pair of
    children preserves the multiset of bits at every position.
    """
    if len(a.bits) != len(b.bits):
        raise LengthMismatch(f"parent lengths differ: {len(a.bits)} vs {len(b.bits)}")
    length = len(a.bits)
    if length < 3:
        raise ValueError(f"crossover needs length >= 3, got {length}")
    i, j = sorted(rng.choice(length, size=2, replace=False))
    child_a = a.bits[:i] + b.bits[i : j + 1] + a.bits[j + 1 :]
    child_b = b.bits[:i] + a.bits[i : j + 1] + b.bits[j + 1 :]
    return IntentionVector(child_a), IntentionVector(child_b)


def mutate(v: IntentionVector, rate: float, rng: np.random.Generator) -> IntentionVector:
    """Flip each bit independently with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"mutation rate must be in [0, 1], got {rate}")
    flips = rng.random(len(v.bits)) < rate
    return IntentionVector(
        tuple(1 - bit if flip else bit for bit, flip in zip(v.bits, flips))
    )


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


def optimize(
    graph: CausalGraph,
    m: ObservationMatrix,
    objective: str,
    ga: GaConfig = GaConfig(),
    registry: Sequence[Intention] = (),
    fitness_fn: Optional[Callable[[IntentionVector], float]] = None,
) -> Tuple[IntentionVector, SearchTrace]:
    """Search intention vectors maximizing the surrogate objective.

    Metrics where smaller is better (per the metric direction table) are
    negated, so the search always maximizes improvement.  Elitism keeps the
    top ``ga.survivors`` unchanged each generation; the rest of the
    population is refilled by crossover of uniformly chosen survivors plus
    mutation.  Fully deterministic for a fixed seed.

    ``fitness_fn`` overrides the surrogate (used by tests and ablations);
    it receives a vector and must return a score to maximize.
    """
    length = len(registry) if registry else len(m.schema.meta_names)
    if length < 2:
        raise ValueError("need at least 2 registry bits to search over")
    if fitness_fn is None:
        surrogate = LinearSurrogate(graph, m)
        sign = float(METRIC_DIRECTIONS.get(objective, +1))

        def fitness_fn(v: IntentionVector) -> float:
            return sign * surrogate_fitness(v, graph, m, objective, surrogate=surrogate)

        # Fail fast on unknown objectives rather than mid-search.
        fitness_fn(IntentionVector.zeros(length))

    rng = np.random.default_rng(ga.seed)
    population = [
        IntentionVector(tuple(int(b) for b in rng.integers(0, 2, size=length)))
        for _ in range(ga.population)
    ]
    stats: List[GenerationStats] = []
    best_ever: Optional[Tuple[float, IntentionVector]] = None
    for generation in range(1, ga.generations + 1):
        scored = [(fitness_fn(v), v) for v in population]
        # Deterministic rank: fitness descending, then bit-string ascending.
        scored.sort(key=lambda pair: (-pair[0], pair[1].to_string()))
        gen_best_fitness, gen_best_vector = scored[0]
        if best_ever is None or gen_best_fitness > best_ever[0]:
            best_ever = (gen_best_fitness, gen_best_vector)
        stats.append(
            GenerationStats(
                index=generation,
                best_vector=best_ever[1],
                best_fitness=best_ever[0],
                mean_fitness=float(np.mean([s for s, _ in scored])),
            )
        )
        if generation == ga.generations:
            break
        survivors = [v for _, v in scored[: ga.survivors]]
        next_population = list(survivors)
        while len(next_population) < ga.population:
            pa = survivors[int(rng.integers(len(survivors)))]
            pb = survivors[int(rng.integers(len(survivors)))]
            if length >= 3:
                child_a, child_b = crossover(pa, pb, rng)
            else:
                child_a, child_b = pa, pb
            next_population.append(mutate(child_a, ga.mutation_rate, rng))
            if len(next_population) < ga.population:
                next_population.append(mutate(child_b, ga.mutation_rate, rng))
        population = next_population
    assert best_ever is not None
    return best_ever[1], SearchTrace(generations=tuple(stats))
