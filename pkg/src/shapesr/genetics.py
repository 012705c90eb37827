"""Random tree generation and variation operators.

All operators honor two genotype limits, ``max_length`` (node count) and
``max_depth``: generated trees respect them by construction, crossover
retries until the child fits (falling back to the first parent), and subtree
mutation grows its replacement inside the room the excised subtree leaves
behind.  Operators never mutate their inputs; trees are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import (
    BINARY_OPS,
    UNARY_OPS,
    Binary,
    Const,
    Expr,
    Unary,
    Var,
    depth,
    node_depth,
    replace_subtree,
    size,
    subtree_at,
)
from .interval import Interval

__all__ = ["GpConfig", "random_tree", "crossover", "mutate"]


@dataclass(frozen=True, slots=True)
class GpConfig:
    max_length: int = 50
    max_depth: int = 12
    constant_range: Interval = Interval(-20.0, 20.0)
    point_mutation_prob: float = 0.5
    leaf_prob: float = 0.25

    def __post_init__(self) -> None:
        # below 3 nodes no binary operation fits, so variation degenerates
        if self.max_length < 3:
            raise ValueError("max_length must be at least 3")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if not 0.0 <= self.point_mutation_prob <= 1.0:
            raise ValueError("point_mutation_prob must be a probability")
        if not 0.0 <= self.leaf_prob <= 1.0:
            raise ValueError("leaf_prob must be a probability")
        cr = self.constant_range
        if cr.is_empty or not (-np.inf < cr.lo <= cr.hi < np.inf):
            raise ValueError("constant_range must be a finite interval")


def _random_leaf(config: GpConfig, arity: int, rng: np.random.Generator) -> Expr:
    if arity > 0 and rng.random() < 0.5:
        return Var(int(rng.integers(arity)))
    return Const(float(rng.uniform(config.constant_range.lo, config.constant_range.hi)))


def _grow(
    config: GpConfig, arity: int, rng: np.random.Generator, depth_left: int, node_budget: int
) -> Expr:
    if depth_left <= 1 or node_budget <= 1 or rng.random() < config.leaf_prob:
        return _random_leaf(config, arity, rng)
    if node_budget >= 3 and rng.random() < 0.5:
        op = BINARY_OPS[int(rng.integers(len(BINARY_OPS)))]
        left_budget = int(rng.integers(1, node_budget - 1))
        return Binary(
            op,
            _grow(config, arity, rng, depth_left - 1, left_budget),
            _grow(config, arity, rng, depth_left - 1, node_budget - 1 - left_budget),
        )
    op = UNARY_OPS[int(rng.integers(len(UNARY_OPS)))]
    return Unary(op, _grow(config, arity, rng, depth_left - 1, node_budget - 1))


def random_tree(config: GpConfig, arity: int, rng: np.random.Generator) -> Expr:
    """Grow a fresh tree with a ramped depth target within the limits."""
    cap = min(config.max_depth, 6)
    target = int(rng.integers(2, cap + 1)) if cap >= 2 else 1
    return _grow(config, arity, rng, target, config.max_length)


def crossover(
    a: Expr, b: Expr, config: GpConfig, rng: np.random.Generator
) -> Expr:
    """Swap a uniformly chosen subtree of ``a`` for one of ``b``.

    Retries the cut points up to ten times when the child would exceed the
    limits; after that returns ``a`` unchanged.
    """
    size_a = size(a)
    size_b = size(b)
    for _ in range(10):
        i = int(rng.integers(size_a))
        j = int(rng.integers(size_b))
        child = replace_subtree(a, i, subtree_at(b, j))
        if size(child) <= config.max_length and depth(child) <= config.max_depth:
            return child
    return a


def _point_mutation(
    e: Expr, config: GpConfig, arity: int, rng: np.random.Generator
) -> Expr:
    idx = int(rng.integers(size(e)))
    node = subtree_at(e, idx)
    t = type(node)
    if t is Const:
        lo, hi = config.constant_range.lo, config.constant_range.hi
        value = min(max(node.value + float(rng.normal(0.0, 1.0)), lo), hi)
        replacement: Expr = Const(value)
    elif t is Var:
        replacement = Var(int(rng.integers(arity)))
    elif t is Unary:
        others = [op for op in UNARY_OPS if op != node.op]
        replacement = Unary(others[int(rng.integers(len(others)))], node.child)
    else:
        others = [op for op in BINARY_OPS if op != node.op]
        replacement = Binary(
            others[int(rng.integers(len(others)))], node.left, node.right
        )
    return replace_subtree(e, idx, replacement)


def _subtree_mutation(
    e: Expr, config: GpConfig, arity: int, rng: np.random.Generator
) -> Expr:
    idx = int(rng.integers(size(e)))
    removed = size(subtree_at(e, idx))
    node_budget = max(config.max_length - (size(e) - removed), 1)
    depth_budget = max(config.max_depth - (node_depth(e, idx) - 1), 1)
    cap = min(depth_budget, 6)
    target = int(rng.integers(1, cap + 1))
    fresh = _grow(config, arity, rng, target, node_budget)
    return replace_subtree(e, idx, fresh)


def mutate(e: Expr, config: GpConfig, arity: int, rng: np.random.Generator) -> Expr:
    """Point mutation (node-local rewrite) or subtree regrowth, coin-flipped."""
    if arity < 1:
        raise ValueError("mutation needs the input arity to redraw variables")
    if rng.random() < config.point_mutation_prob:
        return _point_mutation(e, config, arity, rng)
    return _subtree_mutation(e, config, arity, rng)
