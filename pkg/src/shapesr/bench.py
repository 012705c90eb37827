"""Benchmark catalog: constrained regression instances and their data protocols.

Ten instances: nine physics formulas drawn from the Feynman symbolic
regression collection plus the Pagie-1 rational polynomial.  Each instance
carries its ground-truth tree, the input box the data is sampled from, and
the shape constraints a model must certify (an output range plus
per-variable monotonicity directions; Pagie-1 uses sign-restricted sub-boxes
because its monotonicity flips at zero).

Two data protocols:

* ``uniform``: 300 points sampled uniformly over the box.  Rows are sorted by
  the first variable and the outer 10% on each end become the test split, so
  testing extrapolates while training interpolates.  Rows where the formula
  is undefined (possible for the refraction instance) are resampled.
* ``grid``: the Pagie-1 protocol.  Training is the 26x26 lattice with step
  0.4 over [-5, 5]^2; testing is the 25x25 lattice offset by 0.2.  Neither
  lattice contains a zero coordinate, where the formula has no value.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .expr import (
    Binary,
    Const,
    Expr,
    Unary,
    Var,
    VariableBox,
    arity,
    evaluate_batch,
    from_string,
    to_string,
)
from .interval import Interval
from .objectives import CONSTRAINT_KINDS, ShapeConstraint

__all__ = [
    "ProblemInstance",
    "Dataset",
    "catalog",
    "instance_by_name",
    "generate_dataset",
    "catalog_to_json",
    "catalog_from_json",
    "dataset_to_csv",
]

DATA_PROTOCOLS = ("uniform", "grid")
UNIFORM_POINTS = 300
UNIFORM_TEST_FRACTION = 0.1


@dataclass(frozen=True, slots=True)
class ProblemInstance:
    name: str
    ground_truth: Expr
    variable_names: tuple[str, ...]
    box: VariableBox
    constraints: tuple[ShapeConstraint, ...]
    data_protocol: str

    def __post_init__(self) -> None:
        if self.data_protocol not in DATA_PROTOCOLS:
            raise ValueError(f"unknown data protocol {self.data_protocol!r}")
        if len(self.variable_names) != self.box.arity:
            raise ValueError("variable names and box arity disagree")
        if arity(self.ground_truth) > self.box.arity:
            raise ValueError("ground truth reads more variables than the box has")

    @property
    def n_objectives(self) -> int:
        return 1 + len(self.constraints)


@dataclass(slots=True, eq=False)
class Dataset:
    """Inputs, targets, and a train/test split mask (True = training row)."""

    X: np.ndarray
    y: np.ndarray
    train_mask: np.ndarray

    def train_inputs(self) -> np.ndarray:
        return self.X[self.train_mask]

    def train_targets(self) -> np.ndarray:
        return self.y[self.train_mask]

    def test_inputs(self) -> np.ndarray:
        return self.X[~self.train_mask]

    def test_targets(self) -> np.ndarray:
        return self.y[~self.train_mask]


# --- formula helpers ----------------------------------------------------------


def _add(a: Expr, b: Expr) -> Expr:
    return Binary("add", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    return Binary("sub", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    return Binary("mul", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    return Binary("div", a, b)


def _sq(a: Expr) -> Expr:
    return Unary("square", a)


def _sqrt(a: Expr) -> Expr:
    return Unary("sqrt", a)


def _exp(a: Expr) -> Expr:
    return Unary("exp", a)


def _neg(a: Expr) -> Expr:
    return Unary("neg", a)


def _sin(a: Expr) -> Expr:
    return Unary("sin", a)


def _asin(a: Expr) -> Expr:
    return Unary("asin", a)


def _tanh(a: Expr) -> Expr:
    return Unary("tanh", a)


def _monotone_constraints(
    box: VariableBox, directions: tuple[int, ...]
) -> list[ShapeConstraint]:
    out = []
    for i, d in enumerate(directions):
        if d > 0:
            out.append(ShapeConstraint.increasing(i, box))
        elif d < 0:
            out.append(ShapeConstraint.decreasing(i, box))
    return out


def _physics_instance(
    name: str,
    variables: tuple[tuple[str, float, float], ...],
    truth: Expr,
    directions: tuple[int, ...],
    output: tuple[float, float] = (0.0, math.inf),
) -> ProblemInstance:
    box = VariableBox(tuple((lo, hi) for _, lo, hi in variables))
    constraints = [ShapeConstraint.bounds(output[0], output[1], box)]
    constraints += _monotone_constraints(box, directions)
    return ProblemInstance(
        name=name,
        ground_truth=truth,
        variable_names=tuple(n for n, _, _ in variables),
        box=box,
        constraints=tuple(constraints),
        data_protocol="uniform",
    )


def _pagie_instance() -> ProblemInstance:
    # 1/(1 + x^-4) + 1/(1 + y^-4); monotone away from 0 in each variable,
    # falling on the negative side and rising on the positive side.
    def term(i: int) -> Expr:
        inv4 = _div(Const(1.0), _sq(_sq(Var(i))))
        return _div(Const(1.0), _add(Const(1.0), inv4))

    box = VariableBox(((-5.0, 5.0), (-5.0, 5.0)))
    x_neg = VariableBox(((-5.0, 0.0), (-5.0, 5.0)))
    x_pos = VariableBox(((0.0, 5.0), (-5.0, 5.0)))
    y_neg = VariableBox(((-5.0, 5.0), (-5.0, 0.0)))
    y_pos = VariableBox(((-5.0, 5.0), (0.0, 5.0)))
    constraints = (
        ShapeConstraint.bounds(0.0, 2.0, box),
        ShapeConstraint.decreasing(0, x_neg),
        ShapeConstraint.increasing(0, x_pos),
        ShapeConstraint.decreasing(1, y_neg),
        ShapeConstraint.increasing(1, y_pos),
    )
    return ProblemInstance(
        name="Pagie-1",
        ground_truth=_add(term(0), term(1)),
        variable_names=("x", "y"),
        box=box,
        constraints=constraints,
        data_protocol="grid",
    )


def _build_catalog() -> tuple[ProblemInstance, ...]:
    V, C = Var, Const
    pi = C(math.pi)

    # scaled bell curve: exp(-(theta/sigma)^2 / 2) / (sqrt(2 pi) sigma)
    i_6_20 = _physics_instance(
        "I.6.20",
        (("sigma", 1, 3), ("theta", 1, 3)),
        _div(
            _exp(_div(_neg(_sq(_div(V(1), V(0)))), C(2.0))),
            _mul(_sqrt(_mul(C(2.0), pi)), V(0)),
        ),
        (0, -1),
    )

    # gravitational attraction: G m1 m2 / squared distance
    i_9_18 = _physics_instance(
        "I.9.18",
        (
            ("x1", 3, 4),
            ("y1", 3, 4),
            ("z1", 3, 4),
            ("m1", 1, 2),
            ("m2", 1, 2),
            ("G", 1, 2),
            ("x2", 1, 2),
            ("y2", 1, 2),
            ("z2", 1, 2),
        ),
        _div(
            _mul(_mul(V(5), V(3)), V(4)),
            _add(
                _add(_sq(_sub(V(6), V(0))), _sq(_sub(V(7), V(1)))),
                _sq(_sub(V(8), V(2))),
            ),
        ),
        (-1, -1, -1, 1, 1, 1, 1, 1, 1),
    )

    # refraction angle: arcsin(lambda / (n d)); undefined when the ratio
    # exceeds 1, which the data protocol resamples away
    i_30_5 = _physics_instance(
        "I.30.5",
        (("lambd", 1, 5), ("n", 1, 5), ("d", 2, 5)),
        _asin(_div(V(0), _mul(V(1), V(2)))),
        (1, -1, -1),
    )

    # scattered power: (eps c Ef^2 / 2)(8 pi r^2 / 3)(w^4 / (w^2 - w0^2)^2)
    i_32_17 = _physics_instance(
        "I.32.17",
        (
            ("epsilon", 1, 2),
            ("c", 1, 2),
            ("Ef", 1, 2),
            ("r", 1, 2),
            ("omega", 1, 2),
            ("omega_0", 3, 5),
        ),
        _mul(
            _mul(
                _mul(C(0.5), _mul(V(0), _mul(V(1), _sq(V(2))))),
                _div(_mul(_mul(C(8.0), pi), _sq(V(3))), C(3.0)),
            ),
            _div(_sq(_sq(V(4))), _sq(_sub(_sq(V(4)), _sq(V(5))))),
        ),
        (1, 1, 1, 1, 1, -1),
    )

    # radiated spectral density: h w^3 / (pi^2 c^2 (exp(h w / kb T) - 1))
    i_41_16 = _physics_instance(
        "I.41.16",
        (("omega", 1, 5), ("T", 1, 5), ("h", 1, 5), ("kb", 1, 5), ("c", 1, 5)),
        _div(
            _mul(V(2), _mul(V(0), _sq(V(0)))),
            _mul(
                _mul(_sq(pi), _sq(V(4))),
                _sub(_exp(_div(_mul(V(2), V(0)), _mul(V(3), V(1)))), C(1.0)),
            ),
        ),
        (0, 1, -1, 1, -1),
    )

    # relativistic energy: m c^2 / sqrt(1 - v^2/c^2)
    i_48_20 = _physics_instance(
        "I.48.20",
        (("m", 1, 5), ("v", 1, 2), ("c", 3, 20)),
        _div(
            _mul(V(0), _sq(V(2))),
            _sqrt(_sub(C(1.0), _div(_sq(V(1)), _sq(V(2))))),
        ),
        (1, 1, 1),
    )

    # paramagnetic polarization: n mom tanh(mom B / (kb T))
    ii_35_21 = _physics_instance(
        "II.35.21",
        (("n_rho", 1, 5), ("mom", 1, 5), ("B", 1, 5), ("kb", 1, 5), ("T", 1, 5)),
        _mul(
            _mul(V(0), V(1)),
            _tanh(_div(_mul(V(1), V(2)), _mul(V(3), V(4)))),
        ),
        (1, 1, 1, -1, -1),
    )

    # transition probability: (p_d Ef t / h) sin^2((w - w0) t / 2)
    iii_9_52 = _physics_instance(
        "III.9.52",
        (
            ("p_d", 1, 3),
            ("Ef", 1, 3),
            ("t", 1, 3),
            ("h", 1, 3),
            ("omega", 1, 5),
            ("omega_0", 1, 5),
        ),
        _mul(
            _div(_mul(_mul(V(0), V(1)), V(2)), V(3)),
            _sq(_sin(_div(_mul(_sub(V(4), V(5)), V(2)), C(2.0)))),
        ),
        (1, 1, 0, -1, 0, 0),
    )

    # magnetic moment magnitude: mom sqrt(Bx^2 + By^2 + Bz^2)
    iii_10_19 = _physics_instance(
        "III.10.19",
        (("mom", 1, 5), ("Bx", 1, 5), ("By", 1, 5), ("Bz", 1, 5)),
        _mul(V(0), _sqrt(_add(_add(_sq(V(1)), _sq(V(2))), _sq(V(3))))),
        (1, 1, 1, 1),
    )

    return (
        i_6_20,
        i_9_18,
        i_30_5,
        i_32_17,
        i_41_16,
        i_48_20,
        ii_35_21,
        iii_9_52,
        iii_10_19,
        _pagie_instance(),
    )


_CATALOG: tuple[ProblemInstance, ...] | None = None


def catalog() -> tuple[ProblemInstance, ...]:
    """All benchmark instances, built once and cached."""
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = _build_catalog()
    return _CATALOG


def instance_by_name(name: str) -> ProblemInstance:
    for inst in catalog():
        if inst.name == name:
            return inst
    known = ", ".join(inst.name for inst in catalog())
    raise KeyError(f"no instance named {name!r}; known: {known}")


# --- data protocols -------------------------------------------------------------


def _uniform_dataset(instance: ProblemInstance, seed: int) -> Dataset:
    rng = np.random.default_rng([seed, 0])
    lows = instance.box.lows()
    highs = instance.box.highs()
    X = rng.uniform(lows, highs, (UNIFORM_POINTS, instance.box.arity))
    y = evaluate_batch(instance.ground_truth, X)
    while True:
        bad = ~np.isfinite(y)
        if not bad.any():
            break
        X[bad] = rng.uniform(lows, highs, (int(bad.sum()), instance.box.arity))
        y[bad] = evaluate_batch(instance.ground_truth, X[bad])
    order = np.argsort(X[:, 0], kind="stable")
    X, y = X[order], y[order]
    n_test = int(UNIFORM_POINTS * UNIFORM_TEST_FRACTION)
    train_mask = np.ones(UNIFORM_POINTS, dtype=bool)
    train_mask[:n_test] = False
    train_mask[-n_test:] = False
    return Dataset(X=X, y=y, train_mask=train_mask)


def _grid_dataset(instance: ProblemInstance) -> Dataset:
    # The ticks are built as k*0.4 + offset on purpose: in binary floats no
    # tick lands exactly on zero (nearest is ~9e-16), so every row of both
    # lattices has a finite target.
    train_ticks = np.arange(26) * 0.4 - 5.0
    test_ticks = np.arange(25) * 0.4 - 4.8
    parts = []
    for ticks in (train_ticks, test_ticks):
        gx, gy = np.meshgrid(ticks, ticks, indexing="ij")
        parts.append(np.column_stack([gx.ravel(), gy.ravel()]))
    X = np.vstack(parts)
    y = evaluate_batch(instance.ground_truth, X)
    if not np.all(np.isfinite(y)):
        raise AssertionError("grid protocol produced an undefined target value")
    train_mask = np.zeros(len(X), dtype=bool)
    train_mask[: len(parts[0])] = True
    return Dataset(X=X, y=y, train_mask=train_mask)


def generate_dataset(instance: ProblemInstance, seed: int) -> Dataset:
    """Materialize the instance's data protocol; same seed, same dataset."""
    if instance.data_protocol == "uniform":
        ds = _uniform_dataset(instance, seed)
    else:
        ds = _grid_dataset(instance)
    if np.var(ds.train_targets()) == 0.0 or np.var(ds.test_targets()) == 0.0:
        raise AssertionError("degenerate split: constant targets")
    return ds


# --- serialization ---------------------------------------------------------------


def _interval_to_list(iv: Interval) -> list[float]:
    return [iv.lo, iv.hi]


def _constraint_to_dict(c: ShapeConstraint) -> dict:
    out = {
        "kind": c.kind,
        "target": _interval_to_list(c.target),
        "region": [list(b) for b in c.region.bounds],
    }
    if c.variable is not None:
        out["variable"] = c.variable
    return out


def _constraint_from_dict(d: dict) -> ShapeConstraint:
    if d["kind"] not in CONSTRAINT_KINDS:
        raise ValueError(f"unknown constraint kind {d['kind']!r}")
    return ShapeConstraint(
        kind=d["kind"],
        target=Interval(*d["target"]),
        region=VariableBox(tuple(tuple(b) for b in d["region"])),
        variable=d.get("variable"),
    )


def catalog_to_json(instances=None) -> str:
    """Serialize instances (default: the whole catalog) to JSON."""
    if instances is None:
        instances = catalog()
    payload = [
        {
            "name": inst.name,
            "ground_truth": to_string(inst.ground_truth),
            "variable_names": list(inst.variable_names),
            "box": [list(b) for b in inst.box.bounds],
            "constraints": [_constraint_to_dict(c) for c in inst.constraints],
            "data_protocol": inst.data_protocol,
        }
        for inst in instances
    ]
    return json.dumps(payload, indent=2)


def catalog_from_json(text: str) -> tuple[ProblemInstance, ...]:
    payload = json.loads(text)
    out = []
    for d in payload:
        out.append(
            ProblemInstance(
                name=d["name"],
                ground_truth=from_string(d["ground_truth"]),
                variable_names=tuple(d["variable_names"]),
                box=VariableBox(tuple(tuple(b) for b in d["box"])),
                constraints=tuple(
                    _constraint_from_dict(c) for c in d["constraints"]
                ),
                data_protocol=d["data_protocol"],
            )
        )
    return tuple(out)


def dataset_to_csv(dataset: Dataset, instance: ProblemInstance) -> str:
    """Rows as CSV with round-trippable floats and a train/test split column."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow([*instance.variable_names, "target", "split"])
    for i in range(len(dataset.X)):
        row = [repr(float(v)) for v in dataset.X[i]]
        row.append(repr(float(dataset.y[i])))
        row.append("train" if dataset.train_mask[i] else "test")
        writer.writerow(row)
    return buf.getvalue()
