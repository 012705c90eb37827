"""Shared test helpers: random tree generation with a seeded generator."""

import numpy as np

from shapesr.expr import BINARY_OPS, UNARY_OPS, Binary, Const, Unary, Var


def random_expr(rng: np.random.Generator, n_vars: int, max_depth: int):
    """Grow a random tree; leaf probability rises as the depth budget shrinks."""
    if max_depth <= 1 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return Var(int(rng.integers(n_vars)))
        return Const(round(float(rng.uniform(-5.0, 5.0)), 3))
    if rng.random() < 0.5:
        op = UNARY_OPS[int(rng.integers(len(UNARY_OPS)))]
        return Unary(op, random_expr(rng, n_vars, max_depth - 1))
    op = BINARY_OPS[int(rng.integers(len(BINARY_OPS)))]
    return Binary(
        op,
        random_expr(rng, n_vars, max_depth - 1),
        random_expr(rng, n_vars, max_depth - 1),
    )
