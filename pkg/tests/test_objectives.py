import math
from types import SimpleNamespace

import numpy as np
import pytest

from shapesr.expr import (
    Binary,
    Const,
    Unary,
    Var,
    VariableBox,
    evaluate_batch,
)
from shapesr.interval import EMPTY, Interval, REAL_LINE
from shapesr.objectives import (
    SENTINEL,
    ShapeConstraint,
    check_feasibility_sampling,
    constraint_expr,
    constraint_penalty,
    evaluate_individual,
    interval_violation,
    is_feasible,
    nmse,
)

INF = math.inf


def box(*pairs):
    return VariableBox(tuple(pairs))


class TestShapeConstraint:
    def test_classmethods(self):
        region = box((0, 1))
        c = ShapeConstraint.bounds(0.0, 2.0, region)
        assert c.kind == "model_bounds" and c.target == Interval(0.0, 2.0)
        c = ShapeConstraint.positive(region)
        assert c.target == Interval(0.0, INF) and c.variable is None
        c = ShapeConstraint.increasing(0, region)
        assert c.kind == "monotone_increasing" and c.variable == 0
        c = ShapeConstraint.decreasing(0, region)
        assert c.target == Interval(-INF, 0.0)

    def test_validation(self):
        region = box((0, 1))
        with pytest.raises(ValueError):
            ShapeConstraint("weird", Interval(0, 1), region)
        with pytest.raises(ValueError):
            ShapeConstraint("model_bounds", EMPTY, region)
        with pytest.raises(ValueError):
            ShapeConstraint("monotone_increasing", Interval(0, INF), region)  # no var
        with pytest.raises(ValueError):
            ShapeConstraint("monotone_increasing", Interval(0, INF), region, 5)
        with pytest.raises(ValueError):
            ShapeConstraint("model_bounds", Interval(0, 1), region, 0)  # stray var
        with pytest.raises(ValueError):
            ShapeConstraint("positivity", Interval(1, INF), region)  # wrong target


class TestIntervalViolation:
    def test_lower_side(self):
        assert interval_violation(Interval(-2, 5), Interval(0, INF)) == 2.0

    def test_contained(self):
        assert interval_violation(Interval(1, 2), Interval(0, 3)) == 0.0
        assert interval_violation(Interval(0, 3), Interval(0, 3)) == 0.0

    def test_both_sides(self):
        assert interval_violation(Interval(-2, 7), Interval(0, 5)) == 4.0

    def test_infinite_target_side_is_free(self):
        assert interval_violation(Interval(-5, INF), Interval(-INF, INF)) == 0.0
        assert interval_violation(Interval(3, INF), Interval(0, INF)) == 0.0

    def test_unbounded_enclosure_against_finite_side(self):
        assert interval_violation(REAL_LINE, Interval(0, INF)) == SENTINEL
        assert interval_violation(Interval(0, INF), Interval(0, 1)) == SENTINEL

    def test_empty_enclosure(self):
        assert interval_violation(EMPTY, Interval(0, INF)) == SENTINEL

    def test_nonnegative_and_capped_fuzz(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            lo = rng.uniform(-10, 10)
            hi = lo + rng.uniform(0, 10)
            t_lo = rng.uniform(-10, 10)
            t_hi = t_lo + rng.uniform(0, 10)
            v = interval_violation(Interval(lo, hi), Interval(t_lo, t_hi))
            assert 0.0 <= v <= SENTINEL

    def test_widening_enclosure_never_reduces_violation(self):
        rng = np.random.default_rng(6)
        target = Interval(-1.0, 1.0)
        for _ in range(200):
            lo = rng.uniform(-5, 5)
            hi = lo + rng.uniform(0, 5)
            pad = rng.uniform(0, 3)
            inner = interval_violation(Interval(lo, hi), target)
            outer = interval_violation(Interval(lo - pad, hi + pad), target)
            assert outer >= inner


class TestConstraintPenalty:
    def test_exact_interval_through_variable(self):
        # ia_eval of a bare variable is exact, so the pin is exact too.
        c = ShapeConstraint.bounds(0.0, INF, box((-2, 5)))
        assert constraint_penalty(Var(0), c) == 2.0

    def test_contained_model(self):
        c = ShapeConstraint.bounds(-10.0, 10.0, box((-2, 5)))
        assert constraint_penalty(Var(0), c) == 0.0

    def test_linear_monotone_is_exactly_zero(self):
        e = Binary("add", Binary("mul", Const(2.0), Var(0)), Const(1.0))
        c = ShapeConstraint.increasing(0, box((-5, 5)))
        assert constraint_penalty(e, c) == 0.0
        c = ShapeConstraint.decreasing(0, box((-5, 5)))
        assert constraint_penalty(e, c) == 2.0

    def test_undefined_everywhere_hits_sentinel(self):
        c = ShapeConstraint.bounds(0.0, INF, box((-2, -1)))
        assert constraint_penalty(Unary("log", Var(0)), c) == SENTINEL

    def test_pole_hits_sentinel(self):
        c = ShapeConstraint.bounds(0.0, INF, box((-1, 1)))
        assert constraint_penalty(Binary("div", Const(1.0), Var(0)), c) == SENTINEL

    def test_monotone_uses_derivative(self):
        e = Unary("square", Var(0))  # increasing only for x > 0
        pos = ShapeConstraint.increasing(0, box((1, 5)))
        mixed = ShapeConstraint.increasing(0, box((-5, 5)))
        assert constraint_penalty(e, pos) == 0.0
        # d/dx = 2x reaches -10 on [-5,5]; outward rounding may add an ulp
        assert constraint_penalty(e, mixed) == pytest.approx(10.0, rel=1e-15)

    def test_constraint_expr_selects_model_or_derivative(self):
        e = Unary("square", Var(0))
        c = ShapeConstraint.bounds(0, INF, box((0, 1)))
        assert constraint_expr(e, c) is e
        c = ShapeConstraint.increasing(0, box((0, 1)))
        d = constraint_expr(e, c)
        assert d == Binary("mul", Const(2.0), Var(0))


class TestNmse:
    def test_perfect_prediction(self):
        y = np.array([1.0, 2.0, 5.0, -3.0])
        assert nmse(y, y.copy()) == 0.0

    def test_mean_predictor_is_exactly_100(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            y = rng.normal(3.0, 2.0, int(rng.integers(5, 400)))
            pred = np.full(y.size, y.mean())
            assert abs(nmse(y, pred) - 100.0) <= 1e-9

    def test_hand_computed_pin(self):
        # y = (0,1,2) vs 0: var = 2/3, mse = 5/3, ratio = 2.5
        y = np.array([0.0, 1.0, 2.0])
        assert nmse(y, np.zeros(3)) == pytest.approx(250.0, abs=1e-10)

    def test_nan_prediction_hits_sentinel(self):
        y = np.array([1.0, 2.0, 3.0])
        pred = np.array([1.0, math.nan, 3.0])
        assert nmse(y, pred) == SENTINEL

    def test_huge_error_is_capped(self):
        y = np.array([0.0, 1.0])
        pred = np.array([1e200, -1e200])
        assert nmse(y, pred) == SENTINEL

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            nmse(np.ones(3), np.ones(4))
        with pytest.raises(ValueError):
            nmse(np.ones(3), np.ones(3))  # zero variance
        with pytest.raises(ValueError):
            nmse(np.ones((2, 2)), np.ones((2, 2)))


def field_strength_instance():
    """mom * sqrt(Bx^2 + By^2 + Bz^2) on [1,5]^4: positive, increasing in all."""
    s = Binary(
        "add",
        Binary("add", Unary("square", Var(1)), Unary("square", Var(2))),
        Unary("square", Var(3)),
    )
    truth = Binary("mul", Var(0), Unary("sqrt", s))
    region = box((1, 5), (1, 5), (1, 5), (1, 5))
    constraints = (
        ShapeConstraint.bounds(0.0, INF, region),
        ShapeConstraint.increasing(0, region),
        ShapeConstraint.increasing(1, region),
        ShapeConstraint.increasing(2, region),
        ShapeConstraint.increasing(3, region),
    )
    return truth, SimpleNamespace(constraints=constraints), region


class TestEvaluateIndividual:
    def test_vector_layout(self):
        truth, instance, region = field_strength_instance()
        rng = np.random.default_rng(3)
        X = rng.uniform(1, 5, (50, 4))
        y = evaluate_batch(truth, X)
        objs = evaluate_individual(Var(0), instance, X, y)
        assert objs.shape == (6,)
        assert np.all(np.isfinite(objs))

    def test_ground_truth_scores_zero_everywhere(self):
        truth, instance, region = field_strength_instance()
        rng = np.random.default_rng(4)
        X = rng.uniform(1, 5, (100, 4))
        y = evaluate_batch(truth, X)
        objs = evaluate_individual(truth, instance, X, y)
        assert objs[0] == 0.0
        assert np.all(objs[1:] == 0.0)
        assert is_feasible(objs)

    def test_zero_model_is_feasible_with_oracle_nmse(self):
        # The all-zero model certifies trivially; its error is the oracle
        # value 100 * mean(y^2) / var(y), not 100.
        truth, instance, region = field_strength_instance()
        rng = np.random.default_rng(9)
        X = rng.uniform(1, 5, (100, 4))
        y = evaluate_batch(truth, X)
        objs = evaluate_individual(Const(0.0), instance, X, y)
        expected = 100.0 * float(np.mean(y * y)) / float(np.var(y))
        assert objs[0] == pytest.approx(expected, rel=1e-12)
        assert np.all(objs[1:] == 0.0)

    def test_violating_model(self):
        truth, instance, region = field_strength_instance()
        rng = np.random.default_rng(10)
        X = rng.uniform(1, 5, (100, 4))
        y = evaluate_batch(truth, X)
        objs = evaluate_individual(Unary("neg", Var(0)), instance, X, y)
        assert objs[1] == 5.0  # image [-5, -1] vs [0, inf)
        assert not is_feasible(objs)


class TestFeasibilitySampling:
    def test_truth_passes(self):
        truth, instance, _ = field_strength_instance()
        rng = np.random.default_rng(21)
        assert check_feasibility_sampling(truth, instance.constraints, rng)

    def test_violator_fails(self):
        _, instance, _ = field_strength_instance()
        rng = np.random.default_rng(22)
        assert not check_feasibility_sampling(
            Unary("neg", Var(0)), instance.constraints, rng
        )

    def test_decreasing_model_fails_increasing_constraint(self):
        _, instance, _ = field_strength_instance()
        rng = np.random.default_rng(23)
        e = Binary("div", Const(1.0), Var(0))
        assert not check_feasibility_sampling(e, instance.constraints, rng)
