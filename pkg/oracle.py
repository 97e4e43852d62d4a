"""
Brute-force reference for the GS-exponential residual.

Everything here is written out straight-line on Python floats with the
`math` module: no weight helpers, no vectorization and no sweep code are
shared with `cert`, so a kernel bug cannot hide in both paths. Single
threaded on purpose.
"""
import logging
import math
from typing import NamedTuple

import pandas as pd

import expr
from errors import ParameterError

logger = logging.getLogger(__name__)

MAX_SAMPLES = 10 ** 7


class OracleWitness(NamedTuple):
    m1: tuple
    m2: tuple
    a: float
    s: float
    residual: float


class OracleResult(NamedTuple):
    worst: float
    witness: OracleWitness
    sample_count: int


def residual_at(Q, G, s, m1, m2, a):
    """
    GS-exponential residual at one sample, recomputed from scratch

    Args:
        Q: FunctionSpec
        G: ModMap
        s: Parameter in (0, 1]
        m1: First point (sequence of floats)
        m2: Second point (sequence of floats)
        a: Mixing parameter in [0, 1]

    Returns:
        float: Q(a m1 + (1-a) m2) - (e^a-1)^s Q(m1) - (e^(1-a)-1)^s Q(m2) - a G(m1, m2, s)
    """
    m1 = [float(c) for c in m1]
    m2 = [float(c) for c in m2]
    mixed = [a * x + (1.0 - a) * y for x, y in zip(m1, m2)]
    if a == 0.0:
        first_weight = 0.0
    else:
        first_weight = math.exp(s * math.log(math.exp(a) - 1.0))
    if 1.0 - a == 0.0:
        second_weight = 0.0
    else:
        second_weight = math.exp(s * math.log(math.exp(1.0 - a) - 1.0))
    left = expr.evaluate(Q.body, mixed)
    right = (first_weight * expr.evaluate(Q.body, m1)
             + second_weight * expr.evaluate(Q.body, m2)
             + a * expr.evaluate(G.body, m1, m2, s=s))
    return left - right


def brute_force_worst_residual(Q, G, s_values, grid):
    """
    Enumerate every (s, a, m1, m2) of the grid and keep the largest residual

    Ties keep the first sample in lexicographic order of (s, a, m1, m2).

    Args:
        Q: FunctionSpec
        G: ModMap
        s_values: Fixed s values; None uses the grid's s-list
        grid: SampleGrid

    Returns:
        OracleResult: (worst residual, witness, number of samples)
    """
    s_values = sorted(set(float(s) for s in (grid.s_values if s_values is None else s_values)))
    a_values = sorted(set(float(a) for a in grid.a_values))
    points = [tuple(float(c) for c in row) for row in grid.m_points(Q.domain)]
    points.sort()
    total = len(s_values) * len(a_values) * len(points) ** 2
    if total > MAX_SAMPLES:
        raise ParameterError(f"{total} samples is too many for the brute-force oracle (limit {MAX_SAMPLES})")

    worst = None
    for s in s_values:
        for a in a_values:
            for m1 in points:
                for m2 in points:
                    value = residual_at(Q, G, s, m1, m2, a)
                    if worst is None or value > worst.residual:
                        worst = OracleWitness(m1, m2, a, s, value)
    logger.info("Oracle enumerated %d samples for %s: worst residual %.6e", total, Q.name, worst.residual)
    return OracleResult(worst.residual, worst, total)


def replay_witnesses(Q, G, table):
    """
    Re-evaluate witness rows (columns s, a, m1_*, m2_*, residual)

    Args:
        Q: FunctionSpec
        G: ModMap
        table: DataFrame read from a witness CSV

    Returns:
        pd.DataFrame: The input rows with `replayed` and `discrepancy` columns
    """
    m1_columns = [f"m1_{i}" for i in range(1, Q.dimension + 1)]
    m2_columns = [f"m2_{i}" for i in range(1, Q.dimension + 1)]
    missing = [c for c in ["s", "a", "residual"] + m1_columns + m2_columns if c not in table.columns]
    if missing:
        raise ParameterError(f"witness table lacks columns {missing}")
    replayed = []
    for _, row in table.iterrows():
        replayed.append(residual_at(Q, G, float(row["s"]), [row[c] for c in m1_columns],
                                    [row[c] for c in m2_columns], float(row["a"])))
    result = table.copy()
    result["replayed"] = replayed
    result["discrepancy"] = (result["replayed"] - result["residual"]).abs()
    return result
