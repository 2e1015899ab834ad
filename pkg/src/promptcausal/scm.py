"""Synthetic linear structural causal models used as test oracles.

Every variable is either an exogenous root (Gaussian or Bernoulli noise) or
a linear function of previously defined variables plus zero-mean Gaussian
noise.  Because assignments are linear, interventional means -- and hence
true average treatment effects -- have closed forms, which the estimators
are tested against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from promptcausal.dataset import ObservationMatrix, VariableSchema

__all__ = [
    "Assignment",
    "SyntheticScm",
    "confounder_triangle",
    "tiered_chain",
    "to_matrix",
]


@dataclass(frozen=True)
class Assignment:
    """One structural assignment: linear in parents plus noise.

    ``noise_kind`` is "normal" (zero-mean Gaussian, scale ``noise_std``) or
    "bernoulli" (binary root with success probability ``p``; no parents).
    """

    parents: Tuple[str, ...] = ()
    coeffs: Tuple[float, ...] = ()
    intercept: float = 0.0
    noise_std: float = 1.0
    noise_kind: str = "normal"
    p: float = 0.5

    def __post_init__(self) -> None:
        if len(self.parents) != len(self.coeffs):
            raise ValueError("parents and coeffs must have equal length")
        if self.noise_kind not in ("normal", "bernoulli"):
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")
        if self.noise_kind == "bernoulli" and self.parents:
            raise ValueError("bernoulli roots cannot have parents")


@dataclass(frozen=True)
class SyntheticScm:
    """Ordered structural assignments; parents must be defined earlier."""

    assignments: Mapping[str, Assignment]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for name, a in self.assignments.items():
            for parent in a.parents:
                if parent not in seen:
                    raise ValueError(
                        f"{name!r} depends on {parent!r} before it is defined"
                    )
            seen.add(name)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(self.assignments)

    def sample(self, n: int, seed: int = 0) -> Dict[str, np.ndarray]:
        rng = np.random.default_rng(seed)
        values: Dict[str, np.ndarray] = {}
        for name, a in self.assignments.items():
            if a.noise_kind == "bernoulli":
                values[name] = (rng.random(n) < a.p).astype(float)
                continue
            total = np.full(n, a.intercept, dtype=float)
            for parent, coeff in zip(a.parents, a.coeffs):
                total += coeff * values[parent]
            if a.noise_std > 0:
                total += rng.normal(0.0, a.noise_std, size=n)
            values[name] = total
        return values

    def interventional_mean(self, target: str, do: Mapping[str, float] = {}) -> float:
        """E[target] under do-interventions, by propagating means."""
        means: Dict[str, float] = {}
        for name, a in self.assignments.items():
            if name in do:
                means[name] = float(do[name])
            elif a.noise_kind == "bernoulli":
                means[name] = a.p
            else:
                means[name] = a.intercept + sum(
                    c * means[p] for p, c in zip(a.parents, a.coeffs)
                )
        if target not in means:
            raise KeyError(target)
        return means[target]

    def true_ate(self, treatment: str, outcome: str, x1: float, x0: float) -> float:
        return self.interventional_mean(outcome, {treatment: x1}) - self.interventional_mean(
            outcome, {treatment: x0}
        )


def confounder_triangle(
    confounder_to_treatment: float = 2.0,
    treatment_to_outcome: float = 10.0,
    confounder_to_outcome: float = 1.0,
    noise_std: float = 1.0,
) -> SyntheticScm:
    """Z -> X -> Y with Z -> Y: the textbook confounded triangle.

    With defaults, X = 2Z + noise and Y = 10X + Z + noise, so the
    observational regression of Y on Z has slope 21 while the true effect
    of X on Y is exactly 10 -- correlation and causation pull apart.
    """
    return SyntheticScm(
        {
            "Z": Assignment(noise_std=noise_std),
            "X": Assignment(parents=("Z",), coeffs=(confounder_to_treatment,), noise_std=noise_std),
            "Y": Assignment(
                parents=("X", "Z"),
                coeffs=(treatment_to_outcome, confounder_to_outcome),
                noise_std=noise_std,
            ),
        }
    )


def tiered_chain(
    meta_to_ling: float = 1.0,
    ling_to_metric: float = 2.0,
    noise_std: float = 0.3,
) -> SyntheticScm:
    """M -> L1 -> C1 with an idle linguistic variable L2.

    M is a fair binary root, so the true effect of M on C1 for the (0, 1)
    intervention pair is meta_to_ling * ling_to_metric.
    """
    return SyntheticScm(
        {
            "M": Assignment(noise_kind="bernoulli", p=0.5),
            "L1": Assignment(parents=("M",), coeffs=(meta_to_ling,), noise_std=noise_std),
            "L2": Assignment(noise_std=1.0),
            "C1": Assignment(parents=("L1",), coeffs=(ling_to_metric,), noise_std=noise_std),
        }
    )


def to_matrix(samples: Mapping[str, np.ndarray], schema: VariableSchema) -> ObservationMatrix:
    """Stack sampled columns into an observation matrix in schema order."""
    values = np.column_stack([np.asarray(samples[name], dtype=float) for name in schema.all_names()])
    return ObservationMatrix(schema=schema, values=values)
