"""
Gradient forms of the GS-exponential inequality for differentiable Q.

The asymptotic remainder o(a) in these bounds has no known constant, so
every margin is computed with o(a) := 0 and reported per a. The small-a
limit is exercised separately through the secant form (`secant_gap`).
"""
import logging
import math
from typing import NamedTuple

import numpy as np
import pandas as pd

import core
import expr
from errors import ParameterError, PreconditionError

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
SECANT_A_VALUES = (1e-2, 1e-3, 1e-4)
BOUND_II_FACTORS = ("s-power", "a-power")


class Gradient(NamedTuple):
    values: np.ndarray
    smooth: bool


def gradient(Q, m, method="dual", h=DEFAULT_STEP):
    """
    Gradient of Q at m

    Args:
        Q: FunctionSpec
        m: Point in the domain of Q
        method: "dual" (forward-mode, exact up to rounding) or "central" (central differences)
        h: Step for central differences; m +- h e_i must stay in the domain

    Returns:
        Gradient: (values, smooth); smooth is False when a kink branch was taken
    """
    m = core.as_point(m, Q.dimension)
    if not Q.domain.contains(m):
        raise ParameterError(f"point {m.tolist()} lies outside the domain of {Q.name}")
    basis = np.eye(Q.dimension)
    if method == "dual":
        results = [expr.evaluate_dual(Q.body, m, e) for e in basis]
        values = np.array([r.derivative for r in results])
        smooth = all(r.smooth for r in results)
        if not smooth:
            logger.warning("Gradient of %s at %s crosses a kink; one-sided branch used", Q.name, m.tolist())
        return Gradient(values, smooth)
    if method == "central":
        if not (isinstance(h, (int, float)) and h > 0):
            raise ParameterError(f"finite-difference step must be positive, got {h!r}")
        values = np.empty(Q.dimension)
        for i, e in enumerate(basis):
            forward, backward = m + h * e, m - h * e
            if not (Q.domain.contains(forward) and Q.domain.contains(backward)):
                raise ParameterError(f"central difference at {m.tolist()} with step {h} leaves the domain along axis {i + 1}")
            values[i] = (Q.value(forward) - Q.value(backward)) / (2.0 * h)
        return Gradient(values, True)
    raise ParameterError(f"unknown gradient method '{method}'; expected 'dual' or 'central'")


def _sample(Q, s, m1, m2, a):
    s = core.check_s(s)
    a = core.check_a(a)
    if a == 0.0:
        raise ParameterError("gradient bounds divide by a; a must be positive")
    m1 = core.as_point(m1, Q.dimension)
    m2 = core.as_point(m2, Q.dimension)
    return s, a, m1, m2


def _directional(Q, m2, m1):
    return float(gradient(Q, m2).values @ (m1 - m2))


class BoundMargins(NamedTuple):
    lhs: float
    rhs_i: float
    rhs_ii: float
    margin_i: float
    margin_ii: float


def check_nonnegative_bounds(Q, G, s, m1, m2, a, factor="s-power"):
    """
    Both gradient bounds for a non-negative differentiable Q (o(a) := 0)

    LHS = grad Q(m2) . (m1 - m2)
    RHS(i) = (e^a-1)^s / a Q(m1) + e^((1-a)s) / a Q(m2) + G(m1, m2, s)
    RHS(ii) = [k (Q(m1) - Q(m2)) + 3 Q(m2)] / a + G(m1, m2, s)

    with k = (e^s-1)^s for factor "s-power" and k = (e^a-1)^s for "a-power".

    Returns:
        BoundMargins: margins RHS - LHS; positive means the strict bound holds
    """
    if factor not in BOUND_II_FACTORS:
        raise ParameterError(f"unknown bound factor '{factor}'; expected one of {BOUND_II_FACTORS}")
    s, a, m1, m2 = _sample(Q, s, m1, m2, a)
    q1, q2 = Q.value(m1), Q.value(m2)
    core.require_sign([q1, q2], "non-negative", f"{Q.name} at the sample endpoints", points=[m1, m2])
    g_value = G.value(m1, m2, s)
    lhs = _directional(Q, m2, m1)
    rhs_i = core.weights(a, s).w1 / a * q1 + math.exp((1.0 - a) * s) / a * q2 + g_value
    k = math.expm1(s) ** s if factor == "s-power" else core.weights(a, s).w1
    rhs_ii = (k * (q1 - q2) + 3.0 * q2) / a + g_value
    return BoundMargins(lhs, rhs_i, rhs_ii, rhs_i - lhs, rhs_ii - lhs)


class BoundMargin(NamedTuple):
    branch: str
    lhs: float
    rhs: float
    margin: float


def check_nonpositive_bound(Q, G, s, m1, m2, a):
    """
    Gradient bound for a non-positive differentiable Q (o(a) := 0)

    margin = (e^a-1)^s / a [Q(m1) - Q(m2)] + G(m1, m2, s) - grad Q(m2) . (m1 - m2);
    non-negative means the bound holds.
    """
    s, a, m1, m2 = _sample(Q, s, m1, m2, a)
    q1, q2 = Q.value(m1), Q.value(m2)
    core.require_sign([q1, q2], "non-positive", f"{Q.name} at the sample endpoints", points=[m1, m2])
    lhs = _directional(Q, m2, m1)
    rhs = core.weights(a, s).w1 / a * (q1 - q2) + G.value(m1, m2, s)
    return BoundMargin("non-positive", lhs, rhs, rhs - lhs)


def check_symmetric_bound(Q, G, s, m1, m2, a):
    """
    Symmetrized gradient bound, branch chosen by the sign of Q at m1 and m2

    LHS = [grad Q(m2) - grad Q(m1)] . (m1 - m2). For positive Q
    RHS = ((e^a-1)^s + e^((1-a)s)) / a [Q(m1) + Q(m2)] + G(m1, m2, s) + G(m2, m1, s);
    for negative Q RHS = G(m1, m2, s) + G(m2, m1, s).

    Raises:
        PreconditionError: Q(m1) and Q(m2) are not both positive or both negative
    """
    s, a, m1, m2 = _sample(Q, s, m1, m2, a)
    q1, q2 = Q.value(m1), Q.value(m2)
    if q1 > 0 and q2 > 0:
        branch = "positive"
    elif q1 < 0 and q2 < 0:
        branch = "negative"
    else:
        raise PreconditionError(f"{Q.name} must be positive at both endpoints or negative at both; "
                                f"got {q1!r} and {q2!r}")
    lhs = float((gradient(Q, m2).values - gradient(Q, m1).values) @ (m1 - m2))
    rhs = G.value(m1, m2, s) + G.value(m2, m1, s)
    if branch == "positive":
        rhs += (core.weights(a, s).w1 + math.exp((1.0 - a) * s)) / a * (q1 + q2)
    return BoundMargin(branch, lhs, rhs, rhs - lhs)


def secant_margin(Q, G, s, m1, m2, a):
    """
    Secant form of the defining inequality, right minus left:

        [w1 Q(m1) + (w2 - 1) Q(m2)] / a + G(m1, m2, s) - [Q(a m1 + (1-a) m2) - Q(m2)] / a

    This is -residual / a, so it is non-negative exactly where the sweep passes.
    """
    s, a, m1, m2 = _sample(Q, s, m1, m2, a)
    w1, w2 = core.weights(a, s)
    q1, q2 = Q.value(m1), Q.value(m2)
    lhs = (Q.value(core.mix_points(m1, m2, a)) - q2) / a
    rhs = (w1 * q1 + (w2 - 1.0) * q2) / a + G.value(m1, m2, s)
    return rhs - lhs


class SecantGap(NamedTuple):
    table: pd.DataFrame
    decreasing: bool


def secant_gap(Q, m1, m2, a_values=SECANT_A_VALUES):
    """
    Distance between the secant slope [Q(m2 + a(m1 - m2)) - Q(m2)] / a and
    grad Q(m2) . (m1 - m2) as a shrinks

    Args:
        Q: FunctionSpec
        m1: First point
        m2: Base point
        a_values: Decreasing positive values of a

    Returns:
        SecantGap: table (a, secant, directional, gap) and whether the gap strictly decreases
    """
    m1 = core.as_point(m1, Q.dimension)
    m2 = core.as_point(m2, Q.dimension)
    directional = _directional(Q, m2, m1)
    q2 = Q.value(m2)
    rows = []
    for a in sorted((core.check_a(a) for a in a_values), reverse=True):
        if a == 0.0:
            raise ParameterError("secant slopes need a > 0")
        secant = (Q.value(m2 + a * (m1 - m2)) - q2) / a
        rows.append({"a": a, "secant": secant, "directional": directional, "gap": abs(secant - directional)})
    table = pd.DataFrame(rows, columns=["a", "secant", "directional", "gap"])
    decreasing = bool(np.all(np.diff(table["gap"].to_numpy()) < 0))
    if not decreasing:
        logger.info("Secant gap for %s is not monotone: %s", Q.name, table["gap"].tolist())
    return SecantGap(table, decreasing)


def margin_curve(Q, G, s, m1, m2, a_values, factor="s-power"):
    """
    Margins as functions of a, as plot data

    Bounds whose sign hypothesis fails at the endpoints are left as NaN.

    Returns:
        pd.DataFrame: a, secant_margin, margin_i, margin_ii, margin_nonpositive, margin_symmetric
    """
    rows = []
    for a in sorted(set(core.check_a(a) for a in a_values)):
        if a == 0.0:
            continue
        row = {"a": a, "secant_margin": secant_margin(Q, G, s, m1, m2, a),
               "margin_i": math.nan, "margin_ii": math.nan,
               "margin_nonpositive": math.nan, "margin_symmetric": math.nan}
        try:
            bounds = check_nonnegative_bounds(Q, G, s, m1, m2, a, factor)
            row["margin_i"], row["margin_ii"] = bounds.margin_i, bounds.margin_ii
        except PreconditionError:
            pass
        try:
            row["margin_nonpositive"] = check_nonpositive_bound(Q, G, s, m1, m2, a).margin
        except PreconditionError:
            pass
        try:
            row["margin_symmetric"] = check_symmetric_bound(Q, G, s, m1, m2, a).margin
        except PreconditionError:
            pass
        rows.append(row)
    return pd.DataFrame(rows, columns=["a", "secant_margin", "margin_i", "margin_ii",
                                       "margin_nonpositive", "margin_symmetric"])
