"""Pessimistic interval arithmetic over expression trees.

Every operation returns an interval guaranteed to contain the true image of
its input intervals.  Guarantees are kept cheap rather than tight:

* computed endpoints are widened outward by one ulp (``math.nextafter``), so
  libm rounding cannot shave the enclosure;
* after widening, results are clamped to the operation's natural range
  (squares are never negative, sines never leave [-1, 1], ...), which keeps
  exact zero/one endpoints provable despite the widening;
* domain violations shrink the input to the valid part first; if nothing
  valid remains the result is ``EMPTY``, which absorbs everything downstream.

``EMPTY`` is encoded as the (NaN, NaN) pair.  A non-empty interval never has
``lo == +inf`` or ``hi == -inf``; overflowed finite arithmetic saturates to
the largest finite float instead so that invariant holds.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

from .expr import Binary, Const, Expr, Unary, Var, VariableBox

__all__ = [
    "Interval",
    "EMPTY",
    "REAL_LINE",
    "ia_apply_unary",
    "ia_apply_binary",
    "ia_eval",
]

_INF = math.inf
_NAN = math.nan
_FMAX = sys.float_info.max
_TWO_PI = 2.0 * math.pi
_HALF_PI = 0.5 * math.pi


@dataclass(frozen=True, slots=True)
class Interval:
    """Closed interval of extended reals; (NaN, NaN) is the empty set."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        lo = float(self.lo)
        hi = float(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if math.isnan(lo) and math.isnan(hi):
            return
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("one-sided NaN interval")
        if lo > hi:
            raise ValueError(f"inverted interval [{lo}, {hi}]")
        if lo == _INF or hi == -_INF:
            raise ValueError(f"degenerate infinite interval [{lo}, {hi}]")

    @property
    def is_empty(self) -> bool:
        return math.isnan(self.lo)

    def contains(self, value: float) -> bool:
        if self.is_empty or math.isnan(value):
            return False
        return self.lo <= value <= self.hi

    def __str__(self) -> str:
        return "EMPTY" if self.is_empty else f"[{self.lo}, {self.hi}]"


EMPTY = Interval(_NAN, _NAN)
REAL_LINE = Interval(-_INF, _INF)

_EMPTY_T = (_NAN, _NAN)


def _down(x: float) -> float:
    return math.nextafter(x, -_INF) if math.isfinite(x) else x


def _up(x: float) -> float:
    return math.nextafter(x, _INF) if math.isfinite(x) else x


def _norm(lo: float, hi: float) -> tuple[float, float]:
    # Overflowed endpoints saturate so [lo, hi] stays a valid nonempty set.
    if lo == _INF:
        lo = _FMAX
    if hi == -_INF:
        hi = -_FMAX
    return lo, hi


# --- unary ops ---------------------------------------------------------------


def _ia_neg(lo: float, hi: float) -> tuple[float, float]:
    return -hi, -lo  # exact


def _ia_exp(lo: float, hi: float) -> tuple[float, float]:
    try:
        out_lo = _down(math.exp(lo))
    except OverflowError:
        out_lo = _FMAX
    try:
        out_hi = _up(math.exp(hi))
    except OverflowError:
        out_hi = _INF
    return max(out_lo, 0.0), out_hi


def _ia_log(lo: float, hi: float) -> tuple[float, float]:
    if hi <= 0.0:
        return _EMPTY_T
    out_lo = -_INF if lo <= 0.0 else _down(math.log(lo))
    out_hi = _INF if hi == _INF else _up(math.log(hi))
    return out_lo, out_hi


def _ia_sqrt(lo: float, hi: float) -> tuple[float, float]:
    if hi < 0.0:
        return _EMPTY_T
    lo = max(lo, 0.0)
    out_lo = max(_down(math.sqrt(lo)), 0.0)
    out_hi = _INF if hi == _INF else _up(math.sqrt(hi))
    return out_lo, out_hi


def _ia_square(lo: float, hi: float) -> tuple[float, float]:
    a, b = lo * lo, hi * hi
    if lo <= 0.0 <= hi:
        out = 0.0, _up(max(a, b))
    elif lo > 0.0:
        out = max(_down(a), 0.0), _up(b)
    else:
        out = max(_down(b), 0.0), _up(a)
    return _norm(*out)


def _ia_tanh(lo: float, hi: float) -> tuple[float, float]:
    out_lo = max(_down(math.tanh(lo)), -1.0)
    out_hi = min(_up(math.tanh(hi)), 1.0)
    return out_lo, out_hi


def _ia_asin(lo: float, hi: float) -> tuple[float, float]:
    lo = max(lo, -1.0)
    hi = min(hi, 1.0)
    if lo > hi:
        return _EMPTY_T
    return _down(math.asin(lo)), _up(math.asin(hi))


def _crosses(lo: float, hi: float, base: float) -> bool:
    """Does some base + 2*pi*k fall in [lo, hi]?

    The check interval is padded by the worst-case float error of the
    candidate positions, so a true critical point can never be missed; the
    padding only ever makes the answer pessimistically True.
    """
    slop = 1e-12 + 4e-16 * max(abs(lo), abs(hi))
    lo -= slop
    hi += slop
    k = math.floor((lo - base) / _TWO_PI)
    for j in (k, k + 1, k + 2):
        c = base + j * _TWO_PI
        if lo <= c <= hi:
            return True
    return False


def _ia_periodic(lo: float, hi: float, fn, max_base: float, min_base: float):
    # Huge arguments defeat both the candidate scan and libm argument
    # reduction; the full range is the only safe answer there.
    if hi - lo >= _TWO_PI or max(abs(lo), abs(hi)) > 1e12:
        return -1.0, 1.0
    v_lo, v_hi = fn(lo), fn(hi)
    if _crosses(lo, hi, max_base):
        out_hi = 1.0
    else:
        out_hi = min(_up(max(v_lo, v_hi)), 1.0)
    if _crosses(lo, hi, min_base):
        out_lo = -1.0
    else:
        out_lo = max(_down(min(v_lo, v_hi)), -1.0)
    return out_lo, out_hi


def _ia_sin(lo: float, hi: float) -> tuple[float, float]:
    return _ia_periodic(lo, hi, math.sin, _HALF_PI, -_HALF_PI)


def _ia_cos(lo: float, hi: float) -> tuple[float, float]:
    return _ia_periodic(lo, hi, math.cos, 0.0, math.pi)


_UNARY_IA = {
    "neg": _ia_neg,
    "exp": _ia_exp,
    "log": _ia_log,
    "sin": _ia_sin,
    "cos": _ia_cos,
    "tanh": _ia_tanh,
    "sqrt": _ia_sqrt,
    "square": _ia_square,
    "asin": _ia_asin,
}


# --- binary ops --------------------------------------------------------------


# A float sum that comes out exactly 0.0 is exact (doubles are a lattice:
# a nonzero sum of two doubles can never round to zero), so zero endpoints
# of add/sub skip widening.  That keeps zero certificates provable.


def _ia_add(alo: float, ahi: float, blo: float, bhi: float):
    lo = alo + blo
    hi = ahi + bhi
    return _norm(lo if lo == 0.0 else _down(lo), hi if hi == 0.0 else _up(hi))


def _ia_sub(alo: float, ahi: float, blo: float, bhi: float):
    lo = alo - bhi
    hi = ahi - blo
    return _norm(lo if lo == 0.0 else _down(lo), hi if hi == 0.0 else _up(hi))


def _ia_mul(alo: float, ahi: float, blo: float, bhi: float):
    lo = _INF
    hi = -_INF
    exact_zero = False
    for x, y in ((alo, blo), (alo, bhi), (ahi, blo), (ahi, bhi)):
        if x == 0.0 or y == 0.0:
            # 0 * inf is 0 here: an exactly-zero factor kills the product in
            # the limit reading used for interval endpoints, and the result
            # is exact (unlike an underflowed product of nonzero factors).
            p = 0.0
            exact_zero = True
        else:
            p = x * y
        if p < lo:
            lo = p
        if p > hi:
            hi = p
    if not (lo == 0.0 and exact_zero):
        lo = _down(lo)
    if not (hi == 0.0 and exact_zero):
        hi = _up(hi)
    return _norm(lo, hi)


def _ia_div(alo: float, ahi: float, blo: float, bhi: float):
    if blo <= 0.0 <= bhi:
        return -_INF, _INF
    # 0 is outside b, so the reciprocal is well defined and monotone.
    rlo = 0.0 if bhi == _INF else _down(1.0 / bhi)
    rhi = 0.0 if blo == -_INF else _up(1.0 / blo)
    return _ia_mul(alo, ahi, rlo, rhi)


_BINARY_IA = {
    "add": _ia_add,
    "sub": _ia_sub,
    "mul": _ia_mul,
    "div": _ia_div,
}


# --- public API ---------------------------------------------------------------


def ia_apply_unary(op: str, a: Interval) -> Interval:
    """Sound enclosure of ``op`` applied to ``a``; EMPTY propagates."""
    fn = _UNARY_IA.get(op)
    if fn is None:
        raise ValueError(f"unknown unary operator {op!r}")
    if a.is_empty:
        return EMPTY
    return Interval(*fn(a.lo, a.hi))


def ia_apply_binary(op: str, a: Interval, b: Interval) -> Interval:
    """Sound enclosure of ``op`` over ``a`` x ``b``; EMPTY propagates."""
    fn = _BINARY_IA.get(op)
    if fn is None:
        raise ValueError(f"unknown binary operator {op!r}")
    if a.is_empty or b.is_empty:
        return EMPTY
    return Interval(*fn(a.lo, a.hi, b.lo, b.hi))


def ia_eval(e: Expr, box: VariableBox) -> Interval:
    """Enclose the image of ``e`` over the box.

    The enclosure contains every value float evaluation can produce at any
    point of the box (NaN results excepted).  EMPTY means the expression is
    undefined on the whole box.
    """
    bounds = box.bounds

    def rec(node: Expr) -> tuple[float, float]:
        t = type(node)
        if t is Const:
            return node.value, node.value
        if t is Var:
            if node.index >= len(bounds):
                raise IndexError(
                    f"tree reads x{node.index} but box has {len(bounds)} variables"
                )
            return bounds[node.index]
        if t is Unary:
            clo, chi = rec(node.child)
            if math.isnan(clo):
                return _EMPTY_T
            return _UNARY_IA[node.op](clo, chi)
        alo, ahi = rec(node.left)
        blo, bhi = rec(node.right)
        if math.isnan(alo) or math.isnan(blo):
            return _EMPTY_T
        return _BINARY_IA[node.op](alo, ahi, blo, bhi)

    return Interval(*rec(e))
