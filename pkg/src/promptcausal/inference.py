"""Average treatment effects via double machine learning.

The effect of a treatment on an outcome is identified by adjusting for the
treatment's parents plus the outcome's other non-descendant parents in the
learned graph.  Two cross-fitted nuisance regressions partial the
adjustment set out of treatment and outcome; the effect coefficient is the
slope of outcome residuals on treatment residuals pooled over folds, with a
heteroskedasticity-robust standard error.  An empty adjustment set reduces
the whole procedure to a plain regression slope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from promptcausal.dataset import ObservationMatrix
from promptcausal.errors import (
    EmptyStratum,
    InsufficientData,
    NotIdentifiable,
    UnknownNode,
)
from promptcausal.graph import CausalGraph

__all__ = [
    "AteConfig",
    "AteEstimate",
    "RidgeGcvRegressor",
    "make_regressor",
    "adjustment_set",
    "estimate_ate",
    "conditional_mean",
]


class RidgeGcvRegressor:
    """Ridge regression with the penalty chosen by generalized
    cross-validation, computed in one pass from the SVD.

    The alpha grid reaches 1e-10 so that effectively noiseless linear data
    is fit to machine precision.  With zero feature columns the model
    degrades to the intercept (train-mean predictor).
    """

    def __init__(self, alphas: Optional[Sequence[float]] = None):
        self.alphas = (
            np.asarray(alphas, dtype=float)
            if alphas is not None
            else np.logspace(-10, 4, 29)
        )
        self.coef_: Optional[np.ndarray] = None
        self.intercept_: float = 0.0
        self.alpha_: float = math.nan

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RidgeGcvRegressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        n, p = X.shape
        if len(y) != n:
            raise ValueError("X and y row counts differ")
        if p == 0 or n < 2:
            self.coef_ = np.zeros(p)
            self.intercept_ = float(y.mean()) if n else 0.0
            self.alpha_ = math.nan
            return self
        x_mean = X.mean(axis=0)
        y_mean = float(y.mean())
        Xc = X - x_mean
        yc = y - y_mean
        U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
        uty = U.T @ yc
        best = (math.inf, self.alphas[0])
        for alpha in self.alphas:
            shrink = s * s / (s * s + alpha)
            fitted = U @ (shrink * uty)
            resid = yc - fitted
            df = float(shrink.sum()) + 1.0  # +1 for the intercept
            denom = n - df
            if denom < 1e-8:
                continue
            gcv = n * float(resid @ resid) / (denom * denom)
            if gcv < best[0]:
                best = (gcv, float(alpha))
        self.alpha_ = best[1]
        factor = s / (s * s + self.alpha_)
        self.coef_ = Vt.T @ (factor * uty)
        self.intercept_ = y_mean - float(x_mean @ self.coef_)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.coef_ is None:
            raise RuntimeError("predict() before fit()")
        X = np.asarray(X, dtype=float)
        return X @ self.coef_ + self.intercept_


def make_regressor(kind: str = "ridge", seed: int = 0):
    """Factory over the nuisance/verification regressor family.

    ``ridge`` is the in-house GCV-tuned linear model; ``boosted`` is a
    gradient-boosted-stumps model for nonlinear relations.  Both expose
    fit(X, y) / predict(X).
    """
    if kind == "ridge":
        return RidgeGcvRegressor()
    if kind == "boosted":
        from sklearn.ensemble import GradientBoostingRegressor

        return GradientBoostingRegressor(max_depth=1, random_state=seed)
    raise ValueError(f"unknown regressor kind {kind!r}")


@dataclass(frozen=True)
class AteConfig:
    n_folds: int = 2
    min_n: int = 50
    seed: int = 0
    regressor: str = "ridge"
    #: When set, bypasses the graph-derived adjustment set (for ablations).
    adjustment_override: Optional[Tuple[str, ...]] = None


@dataclass(frozen=True)
class AteEstimate:
    treatment: str
    outcome: str
    x1: float
    x0: float
    point: float
    stderr: float
    ci95: Tuple[float, float]
    adjustment_set: Tuple[str, ...]
    theta: float
    n_used: int

    def as_dict(self) -> dict:
        return {
            "treatment": self.treatment,
            "outcome": self.outcome,
            "x1": self.x1,
            "x0": self.x0,
            "point": self.point,
            "stderr": self.stderr,
            "ci95": list(self.ci95),
            "adjustment_set": list(self.adjustment_set),
            "theta": self.theta,
            "n_used": self.n_used,
        }


def adjustment_set(graph: CausalGraph, treatment: str, outcome: str) -> Tuple[str, ...]:
    """Parents of the treatment plus the outcome's other parents that are
    not downstream of the treatment.  Nodes absent from the graph are
    treated as isolated (empty parent sets)."""
    pa_t = set(graph.parents(treatment)) if treatment in graph.tiers else set()
    pa_y = set(graph.parents(outcome)) if outcome in graph.tiers else set()
    desc_t = graph.descendants(treatment) if treatment in graph.tiers else frozenset()
    z = pa_t | (pa_y - {treatment} - set(desc_t))
    z.discard(outcome)
    return tuple(sorted(z))


def estimate_ate(
    m: ObservationMatrix,
    graph: CausalGraph,
    treatment: str,
    outcome: str,
    x1: float,
    x0: float,
    config: AteConfig = AteConfig(),
) -> AteEstimate:
    """Effect of setting ``treatment`` to x1 versus x0 on ``outcome``.

    Raises :class:`NotIdentifiable` when the treatment is a descendant of
    the outcome, and :class:`InsufficientData` below ``config.min_n`` rows.
    Deterministic: the fold split is seeded.
    """
    if treatment == outcome:
        raise ValueError("treatment and outcome must differ")
    for name in (treatment, outcome):
        if name not in m.schema.all_names():
            raise UnknownNode(name)
    if (
        treatment in graph.tiers
        and outcome in graph.tiers
        and treatment in graph.descendants(outcome)
    ):
        raise NotIdentifiable(
            f"{treatment!r} is a descendant of {outcome!r}; effect not identifiable"
        )
    n = m.n_rows
    if n < config.min_n:
        raise InsufficientData(f"need >= {config.min_n} rows, got {n}")
    if config.adjustment_override is not None:
        z_names = tuple(sorted(config.adjustment_override))
    else:
        z_names = adjustment_set(graph, treatment, outcome)
    t = m.column(treatment)
    y = m.column(outcome)
    Z = (
        np.column_stack([m.column(name) for name in z_names])
        if z_names
        else np.empty((n, 0))
    )

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    folds = np.array_split(perm, max(2, config.n_folds))
    t_resid = np.empty(n)
    y_resid = np.empty(n)
    for fold in folds:
        train = np.setdiff1d(perm, fold, assume_unique=True)
        g_y = make_regressor(config.regressor, config.seed).fit(Z[train], y[train])
        g_t = make_regressor(config.regressor, config.seed).fit(Z[train], t[train])
        y_resid[fold] = y[fold] - g_y.predict(Z[fold])
        t_resid[fold] = t[fold] - g_t.predict(Z[fold])

    denom = float(t_resid @ t_resid)
    if denom <= 1e-12:
        raise InsufficientData(
            f"treatment {treatment!r} has no residual variation given {list(z_names)}"
        )
    theta = float(t_resid @ y_resid) / denom
    u = y_resid - theta * t_resid
    stderr_theta = math.sqrt(float((t_resid * u) @ (t_resid * u))) / denom
    gap = x1 - x0
    point = theta * gap
    stderr = stderr_theta * abs(gap)
    ci = (point - 1.96 * stderr, point + 1.96 * stderr)
    return AteEstimate(
        treatment=treatment,
        outcome=outcome,
        x1=float(x1),
        x0=float(x0),
        point=point,
        stderr=stderr,
        ci95=ci,
        adjustment_set=z_names,
        theta=theta,
        n_used=n,
    )


def conditional_mean(
    m: ObservationMatrix, variable: str, condition: Tuple[str, float]
) -> float:
    """Sample mean of ``variable`` over rows where a binary condition holds.

    Raises :class:`EmptyStratum` when no row satisfies the condition.
    """
    cond_name, cond_value = condition
    cond_col = m.column(cond_name)
    if not np.isin(cond_col, (0.0, 1.0)).all():
        raise ValueError(f"condition variable {cond_name!r} is not binary")
    rows = cond_col == float(cond_value)
    if not rows.any():
        raise EmptyStratum(f"no rows with {cond_name} == {cond_value}")
    return float(m.column(variable)[rows].mean())
