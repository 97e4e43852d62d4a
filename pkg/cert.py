"""
Certification and refutation of membership in the GS-exponential class and
the three comparison classes, plus minimal modulating maps.

A pass is a sampling certificate over the grid, not a proof; a fail
(worst residual above the tolerance) is a genuine counterexample.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
import pandas as pd

import core
from core import DEFAULT_TOLERANCE, ModMap
from errors import EvaluationDomainError, ParameterError, PreconditionError, SampleEvaluationError
from utils import parallel_map, point_columns, sample_row

logger = logging.getLogger(__name__)

# violating samples kept per report, beyond the worst one per s
VIOLATION_CAP = 1000
EQUIVALENCE_TOLERANCE = 1e-12


class ClassId(str, Enum):
    GS_EXPONENTIAL = "gs-exponential"
    S_CONVEX = "s-convex"
    SUB_B_S_CONVEX = "sub-b-s-convex"
    EXPONENTIAL_KIND = "exponential-kind"


@dataclass(frozen=True)
class ResidualSample:
    """Left minus right side of a class inequality at one (m1, m2, a, s)"""
    m1: tuple
    m2: tuple
    a: float
    s: float
    residual: float

    def key(self):
        """Tie-break order for worst-witness selection"""
        return (self.s, self.a, self.m1, self.m2)

    def to_row(self):
        return sample_row(self.s, self.a, self.m1, self.m2, self.residual)

    def to_dict(self):
        return {"m1": list(self.m1), "m2": list(self.m2), "a": self.a, "s": self.s, "residual": self.residual}


def worse(candidate, incumbent):
    """True if candidate should replace incumbent as the worst sample"""
    if incumbent is None:
        return True
    if candidate.residual != incumbent.residual:
        return candidate.residual > incumbent.residual
    return candidate.key() < incumbent.key()


@dataclass
class ConvexityReport:
    class_id: str
    function: str
    modmap: str
    worst: ResidualSample
    sample_count: int
    tolerance: float
    s_values: tuple
    witnesses: pd.DataFrame = field(repr=False, default=None)

    @property
    def verdict(self):
        return "fail" if self.worst.residual > self.tolerance else "pass"

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_dict(self):
        return {
            "class_id": self.class_id,
            "function": self.function,
            "modmap": self.modmap,
            "verdict": self.verdict,
            "worst": self.worst.to_dict(),
            "sample_count": self.sample_count,
            "tolerance": self.tolerance,
            "s_values": list(self.s_values),
        }


def _as_class(class_id):
    try:
        return ClassId(class_id)
    except ValueError:
        raise ParameterError(f"unknown class id '{class_id}'; expected one of "
                             f"{[c.value for c in ClassId]}") from None


def _power_weights(a, s):
    """(a^s, (1-a)^s) with 0^s := 0"""
    a = np.asarray(a, dtype=float)
    b = 1.0 - a
    with np.errstate(divide="ignore"):
        w1 = np.where(a > 0, np.exp(s * np.log(np.where(a > 0, a, 1.0))), 0.0)
        w2 = np.where(b > 0, np.exp(s * np.log(np.where(b > 0, b, 1.0))), 0.0)
    return w1, w2


def class_weights(class_id, a, s):
    """Right-hand side weights (w1, w2) and the coefficient of G for a class"""
    if class_id is ClassId.GS_EXPONENTIAL:
        w1, w2 = core.weights(a, s)
        return w1, w2, a
    if class_id is ClassId.EXPONENTIAL_KIND:
        return np.expm1(a), np.expm1(1.0 - a), 0.0
    w1, w2 = _power_weights(a, s)
    return w1, w2, (1.0 if class_id is ClassId.SUB_B_S_CONVEX else 0.0)


def residual(Q, G, s, m1, m2, a):
    """
    Residual of the defining inequality at one sample

    Q(a m1 + (1-a) m2) - w1 Q(m1) - w2 Q(m2) - a G(m1, m2, s); non-positive
    means the inequality holds at this sample.

    Args:
        Q: FunctionSpec
        G: ModMap
        s: Parameter in (0, 1]
        m1: First point, inside the domain of Q
        m2: Second point, inside the domain of Q
        a: Mixing parameter in [0, 1]

    Returns:
        float: The residual
    """
    s = core.check_s(s)
    a = core.check_a(a)
    m1 = core.as_point(m1, Q.dimension)
    m2 = core.as_point(m2, Q.dimension)
    for point in (m1, m2):
        if not Q.domain.contains(point):
            raise ParameterError(f"point {point.tolist()} lies outside the domain of {Q.name}")
    w1, w2 = core.weights(a, s)
    try:
        mixed = Q.value(core.mix_points(m1, m2, a))
        g_value = G.value(m1, m2, s)
        return mixed - w1 * Q.value(m1) - w2 * Q.value(m2) - a * g_value
    except EvaluationDomainError as e:
        raise SampleEvaluationError(e, ResidualSample(tuple(m1), tuple(m2), a, s, float("nan"))) from e


class _PairPlan(NamedTuple):
    points: np.ndarray
    first: np.ndarray  # index of m1 for every ordered pair
    second: np.ndarray  # index of m2 for every ordered pair
    q_points: np.ndarray


def _plan(Q, grid):
    points = grid.m_points(Q.domain)
    try:
        q_points = Q.values(points)
    except EvaluationDomainError as e:
        point = tuple(points[e.index or 0])
        raise SampleEvaluationError(e, ResidualSample(point, point, float("nan"), float("nan"),
                                                      float("nan"))) from e
    count = len(points)
    first, second = np.meshgrid(np.arange(count), np.arange(count), indexing="ij")
    return _PairPlan(points, first.ravel(), second.ravel(), q_points)


def _sample_at(plan, pair, a, s, value=float("nan")):
    return ResidualSample(tuple(plan.points[plan.first[pair]].tolist()),
                          tuple(plan.points[plan.second[pair]].tolist()), float(a), float(s), float(value))


def _g_values(plan, G, s):
    m1s = plan.points[plan.first]
    m2s = plan.points[plan.second]
    try:
        return G.values(m1s, m2s, s)
    except EvaluationDomainError as e:
        raise SampleEvaluationError(e, _sample_at(plan, e.index or 0, float("nan"), s)) from e


def _sweep(class_id, Q, G, grid, s_values, tolerance, threads=1):
    """
    Evaluate a class inequality on every (m1, m2, a, s) of the grid

    Sweeps run per a-value (optionally threaded); the reduction compares
    (residual, tie-break key) so the outcome does not depend on task order.
    """
    plan = _plan(Q, grid)
    # G does not depend on a, so evaluate it once per s
    g_by_s = {}
    for s in s_values:
        uses_g = G is not None and class_id in (ClassId.GS_EXPONENTIAL, ClassId.SUB_B_S_CONVEX)
        g_by_s[s] = _g_values(plan, G, s) if uses_g else 0.0
    # pair arrays shared by every a
    m1s = plan.points[plan.first]
    m2s = plan.points[plan.second]
    q1 = plan.q_points[plan.first]
    q2 = plan.q_points[plan.second]

    def sweep_a(a):
        try:
            q_mix = Q.values(core.mix_points(m1s, m2s, a))
        except EvaluationDomainError as e:
            raise SampleEvaluationError(e, _sample_at(plan, e.index or 0, a, s_values[0])) from e
        worst_by_s = {}
        violations = []
        for s in s_values:
            w1, w2, g_coefficient = class_weights(class_id, a, s)
            residuals = q_mix - w1 * q1 - w2 * q2 - g_coefficient * g_by_s[s]
            pair = int(np.argmax(residuals))  # first occurrence: smallest (m1, m2)
            worst_by_s[s] = _sample_at(plan, pair, a, s, residuals[pair])
            for bad in np.flatnonzero(residuals > tolerance)[:VIOLATION_CAP]:
                violations.append(_sample_at(plan, int(bad), a, s, residuals[bad]))
        return worst_by_s, violations

    results = parallel_map(sweep_a, grid.a_values, threads)

    # merge per-a results in a fixed order
    worst_by_s = {}
    violations = []
    for partial, found in results:
        for s, sample in partial.items():
            if worse(sample, worst_by_s.get(s)):
                worst_by_s[s] = sample
        violations.extend(found)
    worst = None
    for sample in worst_by_s.values():
        if worse(sample, worst):
            worst = sample

    # witness table: worst rows per s first, then violations
    violations.sort(key=lambda v: (-v.residual, v.key()))
    rows = [dict(sample.to_row(), kind="worst") for sample in sorted(worst_by_s.values(), key=ResidualSample.key)]
    rows += [dict(v.to_row(), kind="violation") for v in violations[:VIOLATION_CAP]]
    columns = ["s", "a"] + point_columns("m1", Q.dimension) + point_columns("m2", Q.dimension) + ["residual", "kind"]
    witnesses = pd.DataFrame(rows, columns=columns)

    sample_count = len(plan.first) * len(grid.a_values) * len(s_values)
    report = ConvexityReport(class_id.value, Q.name, G.name if G is not None else None, worst,
                             sample_count, tolerance, tuple(s_values), witnesses)
    logger.info("%s sweep of %s over %d samples: %s (worst residual %.3e at a=%g, s=%g)",
                class_id.value, Q.name, sample_count, report.verdict, worst.residual, worst.a, worst.s)
    return report


def check_gs_convex(Q, G, s_values, grid, tolerance=DEFAULT_TOLERANCE, threads=1):
    """
    Sweep the defining inequality of the GS-exponential class

    Args:
        Q: FunctionSpec
        G: ModMap (same dimension as Q)
        s_values: Fixed s values to test; None uses the grid's s-list
        grid: SampleGrid
        tolerance: Residuals above this refute membership
        threads: Worker threads for the sweep

    Returns:
        ConvexityReport: Verdict with the worst witness
    """
    tolerance = core.check_tolerance(tolerance)
    if G.dimension != Q.dimension:
        raise ParameterError(f"modulating map {G.name} has dimension {G.dimension}, function has {Q.dimension}")
    s_values = grid.s_values if s_values is None else tuple(sorted(set(core.check_s(s) for s in s_values)))
    if not s_values:
        raise ParameterError("the s-list is empty")
    return _sweep(ClassId.GS_EXPONENTIAL, Q, G, grid, s_values, tolerance, threads)


def _require_sampled_sign(Q, grid, sign):
    points = grid.m_points(Q.domain)
    core.require_sign(Q.values(points), sign, f"function {Q.name}", points=points)


def _check_exponential_kind(Q, grid, tolerance, sign, threads):
    _require_sampled_sign(Q, grid, sign)
    return _sweep(ClassId.EXPONENTIAL_KIND, Q, None, grid, (1.0,), tolerance, threads)


def check_class(class_id, Q, G, s, grid, tolerance=DEFAULT_TOLERANCE, threads=1):
    """
    Sweep one of the four class inequalities for a single s

    Args:
        class_id: ClassId or its string value
        Q: FunctionSpec
        G: ModMap for gs-exponential and sub-b-s-convex, None otherwise
        s: Fixed s in (0, 1]; ignored by exponential-kind
        grid: SampleGrid
        tolerance: Residuals above this refute membership
        threads: Worker threads

    Returns:
        ConvexityReport: Verdict for that class

    Raises:
        PreconditionError: Missing or forbidden G; non-positive Q for exponential-kind
    """
    class_id = _as_class(class_id)
    tolerance = core.check_tolerance(tolerance)
    s = core.check_s(s)
    if class_id in (ClassId.GS_EXPONENTIAL, ClassId.SUB_B_S_CONVEX):
        if G is None:
            raise PreconditionError(f"{class_id.value} needs a modulating map")
        if class_id is ClassId.GS_EXPONENTIAL:
            return check_gs_convex(Q, G, [s], grid, tolerance, threads)
        return _sweep(class_id, Q, G, grid, (s,), tolerance, threads)
    if G is not None:
        raise PreconditionError(f"{class_id.value} takes no modulating map")
    if class_id is ClassId.EXPONENTIAL_KIND:
        return _check_exponential_kind(Q, grid, tolerance, "positive", threads)
    return _sweep(class_id, Q, None, grid, (s,), tolerance, threads)


def reduction_equivalence(Q, grid, tolerance=DEFAULT_TOLERANCE, threads=1):
    """
    With s = 1 and G = 0 the GS-exponential sweep must coincide with the
    exponential-kind sweep for a non-negative Q.

    Returns:
        bool: True iff both verdicts agree and the worst residuals agree within 1e-12
    """
    _require_sampled_sign(Q, grid, "non-negative")
    gs = check_gs_convex(Q, ModMap.zero(Q.dimension), [1.0], grid, tolerance, threads)
    kind = _check_exponential_kind(Q, grid, tolerance, "non-negative", threads)
    agree = gs.verdict == kind.verdict and abs(gs.worst.residual - kind.worst.residual) <= EQUIVALENCE_TOLERANCE
    if not agree:
        logger.warning("Reduction mismatch for %s: %s/%.3e vs %s/%.3e", Q.name, gs.verdict,
                       gs.worst.residual, kind.verdict, kind.worst.residual)
    return agree


class MinimalG(NamedTuple):
    gstar: float
    argmax_a: float
    endpoint_feasible: bool
    endpoint_residual: float


def _positive_a_grid(a_values):
    a_values = np.asarray(sorted(set(core.check_a(a) for a in a_values)), dtype=float)
    if a_values.size == 0:
        raise ParameterError("the a-grid for the minimal modulating map is empty")
    if a_values[0] <= 0:
        raise ParameterError("the a-grid for the minimal modulating map must exclude 0")
    return a_values


def minimal_g(Q, s, m1, m2, a_values):
    """
    Smallest constant G making the inequality hold at (m1, m2) on an a-grid

    gstar = max over a of [Q(a m1 + (1-a) m2) - w1 Q(m1) - w2 Q(m2)] / a.
    The a = 0 instance Q(m2) - (e - 1)^s Q(m2) <= 0 is reported separately:
    no finite G repairs it because a G vanishes there.

    Args:
        Q: FunctionSpec
        s: Parameter in (0, 1]
        m1: First point
        m2: Second point
        a_values: Grid inside (0, 1]

    Returns:
        MinimalG: (gstar, argmax a, endpoint feasible, endpoint residual)
    """
    s = core.check_s(s)
    a = _positive_a_grid(a_values)
    m1 = core.as_point(m1, Q.dimension)
    m2 = core.as_point(m2, Q.dimension)
    q1, q2 = Q.value(m1), Q.value(m2)
    mixes = core.mix_points(m1[None, :], m2[None, :], a[:, None])
    w1, w2 = core.weights(a, s)
    ratios = (Q.values(mixes) - w1 * q1 - w2 * q2) / a
    best = int(np.argmax(ratios))
    endpoint_residual = q2 - core.weights(0.0, s).w2 * q2
    return MinimalG(float(ratios[best]), float(a[best]), bool(endpoint_residual <= 0.0), float(endpoint_residual))


def minimal_g_landscape(Q, s, grid, threads=1):
    """
    Minimal constant G for every sampled pair, as plot data

    Returns:
        pd.DataFrame: m1_*, m2_*, gstar, argmax_a, endpoint_feasible, endpoint_residual
    """
    a_values = [a for a in grid.a_values if a > 0]
    points = grid.m_points(Q.domain)

    def row(pair):
        m1, m2 = points[pair[0]], points[pair[1]]
        result = minimal_g(Q, s, m1, m2, a_values)
        values = dict(zip(point_columns("m1", Q.dimension), m1.tolist()))
        values.update(zip(point_columns("m2", Q.dimension), m2.tolist()))
        values.update(result._asdict())
        return values

    pairs = [(i, j) for i in range(len(points)) for j in range(len(points))]
    table = pd.DataFrame(parallel_map(row, pairs, threads))
    infeasible = int((~table["endpoint_feasible"]).sum())
    if infeasible:
        logger.warning("%d of %d pairs violate the a=0 constraint for %s; no finite G repairs them",
                       infeasible, len(table), Q.name)
    return table
