"""Fitness objectives: data error plus one violation penalty per shape constraint.

The data objective is the normalized mean squared error in percent, so a
predictor that always answers the target mean scores exactly 100.  Each shape
constraint contributes its own objective: the distance by which the interval
enclosure of the model (or of a partial derivative, for monotonicity) leaves
the constraint's target interval.  A penalty of exactly zero is therefore a
proof, not a sample statistic: the constraint holds on the whole region.

All objectives are finite; anything unbounded, undefined, or NaN collapses to
the ``SENTINEL`` value so dominance comparisons stay well behaved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import Expr, VariableBox, differentiate, evaluate_batch, simplify
from .interval import Interval, ia_eval

__all__ = [
    "SENTINEL",
    "CONSTRAINT_KINDS",
    "ShapeConstraint",
    "constraint_expr",
    "interval_violation",
    "constraint_penalty",
    "nmse",
    "evaluate_individual",
    "is_feasible",
    "check_feasibility_sampling",
]

SENTINEL = 1e12

CONSTRAINT_KINDS = (
    "model_bounds",
    "positivity",
    "negativity",
    "monotone_increasing",
    "monotone_decreasing",
)

_MONOTONE_KINDS = frozenset({"monotone_increasing", "monotone_decreasing"})

# Canonical targets implied by the kind; model_bounds carries its own.
_IMPLIED_TARGET = {
    "positivity": Interval(0.0, math.inf),
    "negativity": Interval(-math.inf, 0.0),
    "monotone_increasing": Interval(0.0, math.inf),
    "monotone_decreasing": Interval(-math.inf, 0.0),
}


@dataclass(frozen=True, slots=True)
class ShapeConstraint:
    """One shape requirement on a region of the input space.

    ``target`` is the interval the model image (or the partial derivative
    image, for the monotone kinds) must stay inside everywhere on ``region``.
    """

    kind: str
    target: Interval
    region: VariableBox
    variable: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in CONSTRAINT_KINDS:
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.target.is_empty:
            raise ValueError("constraint target must be a nonempty interval")
        if self.kind in _MONOTONE_KINDS:
            if self.variable is None:
                raise ValueError(f"{self.kind} needs a variable index")
            if not 0 <= self.variable < self.region.arity:
                raise ValueError(
                    f"variable {self.variable} outside region arity {self.region.arity}"
                )
        elif self.variable is not None:
            raise ValueError(f"{self.kind} takes no variable index")
        implied = _IMPLIED_TARGET.get(self.kind)
        if implied is not None and self.target != implied:
            raise ValueError(f"{self.kind} target must be {implied}")

    @classmethod
    def bounds(cls, lo: float, hi: float, region: VariableBox) -> "ShapeConstraint":
        return cls("model_bounds", Interval(lo, hi), region)

    @classmethod
    def positive(cls, region: VariableBox) -> "ShapeConstraint":
        return cls("positivity", _IMPLIED_TARGET["positivity"], region)

    @classmethod
    def negative(cls, region: VariableBox) -> "ShapeConstraint":
        return cls("negativity", _IMPLIED_TARGET["negativity"], region)

    @classmethod
    def increasing(cls, variable: int, region: VariableBox) -> "ShapeConstraint":
        return cls(
            "monotone_increasing",
            _IMPLIED_TARGET["monotone_increasing"],
            region,
            variable,
        )

    @classmethod
    def decreasing(cls, variable: int, region: VariableBox) -> "ShapeConstraint":
        return cls(
            "monotone_decreasing",
            _IMPLIED_TARGET["monotone_decreasing"],
            region,
            variable,
        )


def constraint_expr(e: Expr, constraint: ShapeConstraint) -> Expr:
    """The expression whose image the constraint bounds.

    The model itself for value constraints; the simplified partial derivative
    for monotonicity constraints.
    """
    if constraint.kind in _MONOTONE_KINDS:
        return simplify(differentiate(e, constraint.variable))
    return e


def interval_violation(enclosure: Interval, target: Interval) -> float:
    """Distance by which ``enclosure`` leaves ``target``; 0 means certified.

    An infinite target side never contributes.  An empty enclosure (the model
    is undefined on the whole region) and an unbounded enclosure side facing a
    finite target side both count as the sentinel.
    """
    if enclosure.is_empty:
        return SENTINEL
    total = 0.0
    if target.lo > -math.inf:
        shortfall = target.lo - enclosure.lo  # inf when enclosure.lo == -inf
        if shortfall > 0.0:
            total += min(shortfall, SENTINEL)
    if target.hi < math.inf:
        overshoot = enclosure.hi - target.hi
        if overshoot > 0.0:
            total += min(overshoot, SENTINEL)
    return min(total, SENTINEL)


def constraint_penalty(e: Expr, constraint: ShapeConstraint) -> float:
    return interval_violation(
        ia_eval(constraint_expr(e, constraint), constraint.region),
        constraint.target,
    )


def nmse(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Normalized MSE in percent: 100 * mean((y - yhat)^2) / var(y).

    Population variance, so predicting the target mean scores exactly 100.
    NaN predictions and overflows collapse to ``SENTINEL``.
    """
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size == 0:
        raise ValueError("nmse expects two equal-length 1-d arrays")
    variance = float(np.var(y_true))
    if variance == 0.0 or not math.isfinite(variance):
        raise ValueError("target variance must be finite and nonzero")
    with np.errstate(over="ignore"):
        resid = y_true - y_pred
        value = 100.0 * float(np.mean(resid * resid)) / variance
    if not math.isfinite(value):
        return SENTINEL
    return min(value, SENTINEL)


def evaluate_individual(e: Expr, instance, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Objective vector: [nmse, penalty_1, ..., penalty_k].

    Penalty order follows ``instance.constraints``.  Always finite.
    """
    constraints = instance.constraints
    out = np.empty(1 + len(constraints))
    out[0] = nmse(y, evaluate_batch(e, X))
    for i, c in enumerate(constraints):
        out[1 + i] = constraint_penalty(e, c)
    return out


def is_feasible(objectives: np.ndarray) -> bool:
    """All penalty objectives exactly zero: every constraint is certified."""
    return bool(np.all(objectives[1:] == 0.0))


def check_feasibility_sampling(
    e: Expr,
    constraints,
    rng: np.random.Generator,
    samples: int = 1000,
) -> bool:
    """Monte-Carlo cross-check of feasibility, independent of interval math.

    Samples each constraint's region uniformly and tests the constrained
    expression's value directly against the target.  No tolerance: interval
    certification covers float evaluation, so certified models pass strictly.
    NaN samples are skipped; they can only stem from float overflow at points
    a certified enclosure already covers.
    """
    for c in constraints:
        f = constraint_expr(e, c)
        lows = c.region.lows()
        highs = c.region.highs()
        X = rng.uniform(lows, highs, (samples, c.region.arity))
        vals = evaluate_batch(f, X)
        finite = vals[np.isfinite(vals)]
        if finite.size and (finite.min() < c.target.lo or finite.max() > c.target.hi):
            return False
    return True
