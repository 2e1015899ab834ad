"""Genetic search and its linear causal surrogate, checked against rigged
fitness landscapes and closed-form structural models."""

import numpy as np
import pytest

from promptcausal.dataset import VariableSchema
from promptcausal.errors import LengthMismatch, UnknownMetric
from promptcausal.graph import CausalGraph, Edge
from promptcausal.intentions import DEFAULT_INTENTIONS, IntentionVector
from promptcausal.optimizer import (
    GaConfig,
    LinearSurrogate,
    crossover,
    mutate,
    optimize,
    surrogate_fitness,
)
from promptcausal.scm import Assignment, SyntheticScm, tiered_chain, to_matrix

CHAIN_SCHEMA = VariableSchema(meta_names=("M",), ling_names=("L1", "L2"), metric_names=("C1",))


def chain_fixture(n=4000, seed=0):
    m = to_matrix(tiered_chain().sample(n, seed=seed), CHAIN_SCHEMA)
    graph = CausalGraph(
        nodes=("M", "L1", "C1"),
        tiers={"M": "M", "L1": "L", "C1": "C"},
        edges=(Edge("M", "L1"), Edge("L1", "C1")),
    )
    return graph, m


class CutsAt:
    """Minimal rng stub driving crossover to fixed cut points."""

    def __init__(self, i, j):
        self._cuts = np.array([i, j])

    def choice(self, n, size, replace):
        return self._cuts


# ---------------------------------------------------------------------------
# GA operators
# ---------------------------------------------------------------------------


def test_crossover_swaps_inclusive_segment():
    # [DERIVED] cuts (1, 3) on 110000 x 001100: the segment at positions
    # 1..3 inclusive is exchanged, giving 101100 and 010000.
    a = IntentionVector((1, 1, 0, 0, 0, 0))
    b = IntentionVector((0, 0, 1, 1, 0, 0))
    child_a, child_b = crossover(a, b, CutsAt(3, 1))  # unordered draw is sorted
    assert child_a.bits == (1, 0, 1, 1, 0, 0)
    assert child_b.bits == (0, 1, 0, 0, 0, 0)


def test_crossover_preserves_bits_per_position():
    # [TRIVIAL] children permute parent bits within each position
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = IntentionVector(tuple(int(x) for x in rng.integers(0, 2, size=8)))
        b = IntentionVector(tuple(int(x) for x in rng.integers(0, 2, size=8)))
        ca, cb = crossover(a, b, rng)
        for k in range(8):
            assert {ca.bits[k], cb.bits[k]} == {a.bits[k], b.bits[k]}


def test_crossover_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(LengthMismatch):
        crossover(IntentionVector((0, 1, 0)), IntentionVector((0, 1)), rng)
    with pytest.raises(ValueError):
        crossover(IntentionVector((0, 1)), IntentionVector((1, 0)), rng)


def test_mutate_rate_extremes():
    # [TRIVIAL] rate 0 is the identity; rate 1 flips every bit
    v = IntentionVector((1, 0, 1, 1, 0))
    rng = np.random.default_rng(0)
    assert mutate(v, 0.0, rng).bits == v.bits
    assert mutate(v, 1.0, rng).bits == (0, 1, 0, 0, 1)
    with pytest.raises(ValueError):
        mutate(v, 1.5, rng)


def test_mutate_is_seeded():
    v = IntentionVector((0,) * 16)
    a = mutate(v, 0.3, np.random.default_rng(7))
    b = mutate(v, 0.3, np.random.default_rng(7))
    assert a.bits == b.bits


def test_ga_config_validation():
    with pytest.raises(ValueError):
        GaConfig(population=4, survivors=5)
    with pytest.raises(ValueError):
        GaConfig(mutation_rate=1.2)
    with pytest.raises(ValueError):
        GaConfig(generations=0)


# ---------------------------------------------------------------------------
# Surrogate
# ---------------------------------------------------------------------------


def test_surrogate_matches_structural_closed_form():
    # [DERIVED] chain slopes 1 then 2: E[C1 | do(M=1)] = 2, do(M=0) = 0.
    graph, m = chain_fixture()
    s = LinearSurrogate(graph, m)
    assert s.expected(IntentionVector((1,)), "C1") == pytest.approx(2.0, abs=0.1)
    assert s.expected(IntentionVector((0,)), "C1") == pytest.approx(0.0, abs=0.1)


def test_surrogate_vector_length_checked():
    graph, m = chain_fixture(n=500)
    s = LinearSurrogate(graph, m)
    with pytest.raises(LengthMismatch):
        s.expected(IntentionVector((1, 0)), "C1")


def test_surrogate_isolated_objective_falls_back_to_mean():
    # objective column present in the data but absent from the graph:
    # every candidate scores the sample mean
    _, m = chain_fixture(n=1000)
    graph = CausalGraph(
        nodes=("M", "L1"), tiers={"M": "M", "L1": "L"}, edges=(Edge("M", "L1"),)
    )
    f1 = surrogate_fitness(IntentionVector((1,)), graph, m, "C1")
    f0 = surrogate_fitness(IntentionVector((0,)), graph, m, "C1")
    assert f1 == f0 == pytest.approx(float(m.column("C1").mean()))


def test_surrogate_fitness_rejects_unknown_objective():
    graph, m = chain_fixture(n=200)
    with pytest.raises(UnknownMetric):
        surrogate_fitness(IntentionVector((1,)), graph, m, "no_such_metric")


def test_prebuilt_surrogate_agrees_with_fresh_fit():
    graph, m = chain_fixture(n=500)
    s = LinearSurrogate(graph, m)
    v = IntentionVector((1,))
    assert surrogate_fitness(v, graph, m, "C1", surrogate=s) == surrogate_fitness(
        v, graph, m, "C1"
    )


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


def test_optimize_rigged_landscape_converges():
    # [DERIVED] popcount fitness has its unique optimum at all-ones; the
    # default budget (pop 20, 30 generations) must find it.
    graph, m = chain_fixture(n=200)
    best, trace = optimize(
        graph, m, "C1", GaConfig(), registry=DEFAULT_INTENTIONS,
        fitness_fn=lambda v: float(sum(v.bits)),
    )
    assert best.bits == (1,) * 12
    series = trace.best_fitness_series()
    assert len(series) == 30
    assert all(a <= b for a, b in zip(series, series[1:]))  # best-so-far is monotone
    assert series[-1] == 12.0
    assert [g.index for g in trace.generations] == list(range(1, 31))
    assert trace.generations[-1].best_vector == best


def test_optimize_is_deterministic():
    names = ("M1", "M2", "M3", "M4")
    scm_spec = {n: Assignment(noise_kind="bernoulli", p=0.5) for n in names}
    scm_spec["C1"] = Assignment(
        parents=names, coeffs=(0.4, -0.3, 0.2, 0.1), noise_std=0.2
    )
    schema = VariableSchema(meta_names=names, ling_names=(), metric_names=("C1",))
    m = to_matrix(SyntheticScm(scm_spec).sample(1000, seed=2), schema)
    graph = CausalGraph(
        nodes=names + ("C1",),
        tiers={**{n: "M" for n in names}, "C1": "C"},
        edges=tuple(Edge(n, "C1") for n in names),
    )
    a_best, a_trace = optimize(graph, m, "C1", GaConfig(seed=5))
    b_best, b_trace = optimize(graph, m, "C1", GaConfig(seed=5))
    assert a_best == b_best
    assert a_trace.best_fitness_series() == b_trace.best_fitness_series()
    assert a_best.bits == (1, 0, 1, 1)  # positive-coefficient bits on, negative off


def test_optimize_flips_sign_for_lower_is_better_metrics():
    # [DERIVED] black_count = 1 - 0.4 M1 - 0.2 M2 + noise and lower is
    # better, so the search must set both bits
    scm = SyntheticScm({
        "M1": Assignment(noise_kind="bernoulli", p=0.5),
        "M2": Assignment(noise_kind="bernoulli", p=0.5),
        "black_count": Assignment(
            parents=("M1", "M2"), coeffs=(-0.4, -0.2), intercept=1.0, noise_std=0.05
        ),
    })
    schema = VariableSchema(meta_names=("M1", "M2"), ling_names=(), metric_names=("black_count",))
    m = to_matrix(scm.sample(2000, seed=1), schema)
    graph = CausalGraph(
        nodes=("M1", "M2", "black_count"),
        tiers={"M1": "M", "M2": "M", "black_count": "C"},
        edges=(Edge("M1", "black_count"), Edge("M2", "black_count")),
    )
    best, _ = optimize(graph, m, "black_count", GaConfig(seed=3))
    assert best.bits == (1, 1)


def test_optimize_requires_searchable_length():
    graph, m = chain_fixture(n=200)
    with pytest.raises(ValueError):
        optimize(graph, m, "C1")  # single meta variable, no registry
