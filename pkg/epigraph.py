"""
Epigraph view of the GS-exponential class.

E(Q) = {(m, alpha) : Q(m) <= alpha}. Q belongs to the class with map G
exactly when E(Q) is closed under

    ((m1, alpha1), (m2, alpha2)) -> (a m1 + (1-a) m2, w1 alpha1 + w2 alpha2 + a G(m1, m2, s))

The check here samples both sides and cross-validates them against the
residual sweep of `cert`.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd

import cert
import core
from core import DEFAULT_TOLERANCE
from errors import EvaluationDomainError, ParameterError, SampleEvaluationError
from utils import parallel_map, point_columns

logger = logging.getLogger(__name__)

DEFAULT_DELTAS = (0.0, 0.1, 1.0)
DEFAULT_SCAN_POINTS = 101
ESCAPE_CAP = 1000


@dataclass(frozen=True)
class EpiPoint:
    m: tuple
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(core.as_point(self.m).tolist()))
        if not (isinstance(self.alpha, (int, float, np.floating)) and math.isfinite(self.alpha)):
            raise ParameterError(f"epigraph level must be finite, got {self.alpha!r}")
        object.__setattr__(self, "alpha", float(self.alpha))


def epi_contains(Q, p, tolerance=DEFAULT_TOLERANCE):
    """
    Membership of (m, alpha) in the epigraph of Q

    Args:
        Q: FunctionSpec
        p: EpiPoint with p.m in the domain of Q
        tolerance: Slack on the level

    Returns:
        bool: Q(p.m) <= p.alpha + tolerance
    """
    tolerance = core.check_tolerance(tolerance)
    if not Q.domain.contains(p.m):
        raise ParameterError(f"point {list(p.m)} lies outside the domain of {Q.name}")
    return Q.value(p.m) <= p.alpha + tolerance


def gs_combine_point(p1, p2, a, s, G):
    """
    GS-exponential combination of two epigraph points

    Args:
        p1: EpiPoint
        p2: EpiPoint
        a: Mixing parameter in [0, 1]
        s: Parameter in (0, 1]
        G: ModMap

    Returns:
        EpiPoint: (a m1 + (1-a) m2, w1 alpha1 + w2 alpha2 + a G(m1, m2, s))
    """
    a = core.check_a(a)
    s = core.check_s(s)
    w1, w2 = core.weights(a, s)
    m1 = np.asarray(p1.m)
    m2 = np.asarray(p2.m)
    level = w1 * p1.alpha + w2 * p2.alpha + a * G.value(m1, m2, s)
    return EpiPoint(core.mix_points(m1, m2, a), level)


def sample_epigraph(Q, points, deltas=DEFAULT_DELTAS):
    """
    Epigraph points (m, Q(m) + delta) for every sampled m and offset delta

    Returns:
        tuple: (points of shape (K * D, n), levels of shape (K * D,)), point-major order
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size == 0 or np.any(deltas < 0) or not np.all(np.isfinite(deltas)):
        raise ParameterError(f"epigraph offsets must be finite and non-negative, got {deltas.tolist()}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = Q.values(points)
    return np.repeat(points, deltas.size, axis=0), (values[:, None] + deltas[None, :]).ravel()


class Escape(NamedTuple):
    m1: tuple
    alpha1: float
    m2: tuple
    alpha2: float
    a: float
    excess: float

    def to_dict(self):
        return self._asdict() | {"m1": list(self.m1), "m2": list(self.m2)}


@dataclass
class EpigraphReport:
    function: str
    modmap: str
    s: float
    tolerance: float
    combinations: int
    escapes: int
    worst_escape: Escape
    gs_verdict: str
    inconsistencies: list = field(default_factory=list)
    escape_table: pd.DataFrame = field(repr=False, default=None)

    @property
    def consistent(self):
        return not self.inconsistencies

    def to_dict(self):
        return {
            "function": self.function,
            "modmap": self.modmap,
            "s": self.s,
            "tolerance": self.tolerance,
            "combinations": self.combinations,
            "escapes": self.escapes,
            "worst_escape": self.worst_escape.to_dict() if self.worst_escape else None,
            "gs_verdict": self.gs_verdict,
            "consistent": self.consistent,
            "inconsistencies": list(self.inconsistencies),
        }


def check_epigraph_theorem(Q, G, s, grid, tolerance=DEFAULT_TOLERANCE, deltas=DEFAULT_DELTAS, threads=1):
    """
    Cross-check function membership against closure of the sampled epigraph

    Forward: a passing sweep admits no escaping combination. Reverse: every
    escaping combination is a failing residual sample. With delta = 0
    sampled, a failing sweep must also produce an escape.

    Args:
        Q: FunctionSpec
        G: ModMap
        s: Parameter in (0, 1]
        grid: SampleGrid; its m-samples and a-values are used
        tolerance: Slack for both the sweep and epigraph membership
        deltas: Non-negative level offsets
        threads: Worker threads

    Returns:
        EpigraphReport: Counts, worst escape and any inconsistency found
    """
    s = core.check_s(s)
    tolerance = core.check_tolerance(tolerance)
    sweep = cert.check_gs_convex(Q, G, [s], grid, tolerance, threads)

    # every ordered pair of sampled epigraph points
    ms, alphas = sample_epigraph(Q, grid.m_points(Q.domain), deltas)
    count = len(ms)
    first, second = (index.ravel() for index in np.meshgrid(np.arange(count), np.arange(count), indexing="ij"))
    m1s, m2s = ms[first], ms[second]
    alpha1, alpha2 = alphas[first], alphas[second]
    try:
        g_values = G.values(m1s, m2s, s)
    except EvaluationDomainError as e:
        bad = e.index or 0
        raise SampleEvaluationError(e, cert.ResidualSample(tuple(m1s[bad]), tuple(m2s[bad]),
                                                           float("nan"), s, float("nan"))) from e

    def escape(pair, a, excess):
        return Escape(tuple(m1s[pair].tolist()), float(alpha1[pair]), tuple(m2s[pair].tolist()),
                      float(alpha2[pair]), float(a), float(excess))

    def combine_at(a):
        w1, w2 = core.weights(a, s)
        levels = w1 * alpha1 + w2 * alpha2 + a * g_values
        mixes = core.mix_points(m1s, m2s, a)
        try:
            excess = Q.values(mixes) - levels
        except EvaluationDomainError as e:
            bad = e.index or 0
            raise SampleEvaluationError(e, cert.ResidualSample(tuple(m1s[bad]), tuple(m2s[bad]),
                                                               a, s, float("nan"))) from e
        worst = int(np.argmax(excess))
        escaped = np.flatnonzero(excess > tolerance)
        return escape(worst, a, excess[worst]), len(escaped), [escape(int(i), a, excess[i]) for i in escaped[:ESCAPE_CAP]]

    # first strictly larger excess wins, a-values arrive in grid order
    worst_escape = None
    escapes = 0
    found = []
    for worst, escaped, samples in parallel_map(combine_at, grid.a_values, threads):
        if worst_escape is None or worst.excess > worst_escape.excess:
            worst_escape = worst
        escapes += escaped
        found.extend(samples)
    combinations = len(first) * len(grid.a_values)

    # compare the set-level view with the residual sweep
    inconsistencies = []
    if sweep.passed and escapes:
        inconsistencies.append(f"sweep passes but {escapes} combined points leave the epigraph")
    if escapes:
        residual = cert.residual(Q, G, s, worst_escape.m1, worst_escape.m2, worst_escape.a)
        if residual <= tolerance:
            inconsistencies.append(f"worst escape at a={worst_escape.a:g} has non-failing residual {residual:.3e}")
    if not sweep.passed and 0.0 in set(float(d) for d in deltas) and not escapes:
        inconsistencies.append("sweep fails but no combined point leaves the epigraph")
    for message in inconsistencies:
        logger.warning("Epigraph inconsistency for %s: %s", Q.name, message)

    # escape table, largest excess first
    dimension = Q.dimension
    rows = []
    for e in sorted(found, key=lambda e: -e.excess)[:ESCAPE_CAP]:
        row = {"a": e.a, "alpha1": e.alpha1, "alpha2": e.alpha2, "excess": e.excess}
        row.update(zip(point_columns("m1", dimension), e.m1))
        row.update(zip(point_columns("m2", dimension), e.m2))
        rows.append(row)
    columns = ["a"] + point_columns("m1", dimension) + ["alpha1"] + point_columns("m2", dimension) + ["alpha2", "excess"]

    report = EpigraphReport(Q.name, G.name, s, tolerance, combinations, escapes,
                            worst_escape if escapes else None, sweep.verdict, inconsistencies,
                            pd.DataFrame(rows, columns=columns))
    logger.info("Epigraph check of %s: %d combinations, %d escapes, sweep %s", Q.name,
                combinations, escapes, sweep.verdict)
    return report


class BoundednessReport(NamedTuple):
    sup: float
    inf: float
    bounded: bool
    witness: tuple
    g_bound: float
    points: int

    def to_dict(self):
        return {"sup": self.sup, "inf": self.inf, "bounded": self.bounded,
                "witness": list(self.witness) if self.witness is not None else None,
                "g_bound": self.g_bound, "points": self.points}


def boundedness_scan(Q, interval=None, points=DEFAULT_SCAN_POINTS, g_bound=None):
    """
    Sample extrema of a one-dimensional Q on an interval

    A failed or non-finite evaluation is evidence of unboundedness; the first
    such point is returned as witness. `g_bound` is only recorded.

    Args:
        Q: One-dimensional FunctionSpec
        interval: [lo, hi] inside the domain; default the whole domain
        points: Number of evenly spaced scan points (at least 2)
        g_bound: Assumed bound on G, echoed in the report

    Returns:
        BoundednessReport: (sup, inf, bounded, witness, g_bound, points)
    """
    if Q.dimension != 1:
        raise ParameterError(f"boundedness scans are one-dimensional; {Q.name} has dimension {Q.dimension}")
    if not isinstance(points, int) or points < 2:
        raise ParameterError(f"a boundedness scan needs at least 2 points, got {points!r}")
    lo, hi = (Q.domain.lower[0], Q.domain.upper[0]) if interval is None else (float(interval[0]), float(interval[1]))
    if not (Q.domain.contains([lo]) and Q.domain.contains([hi]) and lo <= hi):
        raise ParameterError(f"interval [{lo}, {hi}] is not inside the domain of {Q.name}")

    values = []
    witness = None
    for r in np.linspace(lo, hi, points):
        try:
            value = Q.value([r])
        except EvaluationDomainError as e:
            logger.debug("Scan of %s failed at %g: %s", Q.name, r, e)
            value = math.nan
        if math.isfinite(value):
            values.append(value)
        elif witness is None:
            witness = (float(r),)
    bounded = witness is None
    sup = max(values) if values else math.nan
    inf = min(values) if values else math.nan
    if not bounded:
        logger.info("Boundedness scan of %s found unbounded evidence at %s", Q.name, witness)
    return BoundednessReport(sup, inf, bounded, witness, None if g_bound is None else float(g_bound), points)
