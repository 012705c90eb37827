"""Shape-constrained symbolic regression toolkit.

Evolves expression trees against data while certifying shape properties
(bounds, sign, monotonicity) over whole input boxes with pessimistic
interval arithmetic.  Constraint violations are extra objectives for
NSGA-II / NSGA-III rather than dataset penalties.
"""

__version__ = "0.1.0"
