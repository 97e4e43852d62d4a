"""
Box-constrained minimization of Q and the sufficient optimality check

    grad Q(m) . (n - m) > G(n, m, s) + 3 Q(m) / a   for every sampled n

with the remainder term o(a) taken as 0.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize

import core
import diff
from errors import LabError, OptimizationError, ParameterError
from utils import format_point, parallel_map

logger = logging.getLogger(__name__)

DEFAULT_STARTS = 4
DEFAULT_MAX_ITERS = 500
DEFAULT_OPT_TOLERANCE = 1e-10
DEFAULT_CERTIFICATE_A = 0.99
METHODS = ("pgd", "lbfgsb")

STATUS_SUPPORTED = "optimality supported by sufficient-condition check"
STATUS_NONE = "no certificate"


@dataclass(frozen=True)
class StepRule:
    """Backtracking line search: start at `initial`, multiply by `shrink` until Armijo holds."""
    initial: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    min_step: float = 1e-16

    def __post_init__(self):
        if not (self.initial > 0 and 0 < self.shrink < 1 and 0 < self.armijo < 1 and 0 < self.min_step < self.initial):
            raise ParameterError(f"invalid step rule {self}")


@dataclass
class StartTrace:
    start: tuple
    point: tuple = None
    value: float = math.nan
    iterations: int = 0
    converged: bool = False
    reason: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def failed(self):
        return self.point is None or not math.isfinite(self.value)

    def to_dict(self):
        return {"start": list(self.start), "point": list(self.point) if self.point is not None else None,
                "value": self.value if math.isfinite(self.value) else None, "iterations": self.iterations,
                "converged": self.converged, "reason": self.reason}


@dataclass
class OptimizationResult:
    function: str
    method: str
    best_point: tuple
    best_value: float
    traces: list

    @property
    def starts(self):
        return len(self.traces)

    @property
    def iterations(self):
        return [t.iterations for t in self.traces]

    @property
    def converged(self):
        return [t.converged for t in self.traces]

    def to_dict(self):
        return {"function": self.function, "method": self.method, "best_point": list(self.best_point),
                "best_value": self.best_value, "starts": [t.to_dict() for t in self.traces]}


def _projected_gradient_descent(Q, x0, max_iters, tolerance, step):
    domain = Q.domain
    trace = StartTrace(tuple(x0.tolist()))
    x = domain.clamp(x0)
    value = Q.value(x)
    trace.history.append(value)
    for iteration in range(1, max_iters + 1):
        gradient = diff.gradient(Q, x)
        grad = gradient.values
        # stationary for the projected step
        if np.linalg.norm(x - domain.clamp(x - grad)) <= tolerance:
            trace.converged, trace.reason = True, "projected gradient below tolerance"
            trace.iterations = iteration - 1
            break
        # backtrack until the Armijo condition holds
        t = step.initial
        while True:
            candidate = domain.clamp(x - t * grad)
            candidate_value = Q.value(candidate)
            if candidate_value <= value + step.armijo * float(grad @ (candidate - x)):
                break
            t *= step.shrink
            if t < step.min_step:
                candidate = None
                break
        trace.iterations = iteration
        if candidate is None:
            # no descent along the chosen branch of a kink
            if not gradient.smooth:
                trace.converged, trace.reason = True, "line search stalled at a kink"
            # stalled on rounding next to a stationary point
            elif np.linalg.norm(x - domain.clamp(x - grad)) <= 1e-6:
                trace.converged, trace.reason = True, "line search stalled at a stationary point"
            else:
                trace.reason = "step underflow"
            break
        moved = float(np.linalg.norm(candidate - x))
        x, value = candidate, candidate_value
        trace.history.append(value)
        if moved <= tolerance:
            trace.converged, trace.reason = True, "step below tolerance"
            break
    else:
        trace.reason = "iteration limit"
    trace.point, trace.value = tuple(x.tolist()), float(value)
    return trace


def _lbfgsb(Q, x0, max_iters, tolerance):
    trace = StartTrace(tuple(x0.tolist()))
    result = optimize.minimize(
        lambda x: Q.value(x),
        x0,
        jac=lambda x: diff.gradient(Q, x).values,
        method="L-BFGS-B",
        bounds=list(zip(Q.domain.lower, Q.domain.upper)),
        options={"maxiter": max_iters, "gtol": tolerance},
    )
    point = Q.domain.clamp(result.x)
    trace.point, trace.value = tuple(point.tolist()), float(Q.value(point))
    trace.iterations, trace.converged, trace.reason = int(result.nit), bool(result.success), str(result.message)
    return trace


def minimize(Q, starts=DEFAULT_STARTS, seed=0, max_iters=DEFAULT_MAX_ITERS, tolerance=DEFAULT_OPT_TOLERANCE,
             step=None, method="pgd", threads=1):
    """
    Multi-start minimization of Q over its box domain

    The first start is the box center, the others are drawn uniformly with
    `seed`. The best finite value wins; ties keep the earliest start.

    Args:
        Q: FunctionSpec
        starts: Number of starting points
        seed: Seed for the random starts
        max_iters: Iteration limit per start
        tolerance: Stop when the projected gradient or the step falls below this
        step: StepRule for projected gradient descent
        method: "pgd" or "lbfgsb"
        threads: Worker threads across starts

    Returns:
        OptimizationResult: Best point and per-start traces

    Raises:
        OptimizationError: Every start failed
    """
    if not isinstance(starts, int) or starts < 1:
        raise ParameterError(f"starts must be a positive integer, got {starts!r}")
    if not isinstance(max_iters, int) or max_iters < 1:
        raise ParameterError(f"max_iters must be a positive integer, got {max_iters!r}")
    if method not in METHODS:
        raise ParameterError(f"unknown method '{method}'; expected one of {METHODS}")
    tolerance = core.check_tolerance(tolerance)
    step = step or StepRule()

    points = [Q.domain.center()]
    if starts > 1:
        rng = np.random.default_rng(seed)
        points.extend(Q.domain.sample_uniform(rng, starts - 1))

    def run(x0):
        try:
            if method == "lbfgsb":
                return _lbfgsb(Q, x0, max_iters, tolerance)
            return _projected_gradient_descent(Q, x0, max_iters, tolerance, step)
        except LabError as e:
            logger.debug("Start %s failed: %s", format_point(x0), e)
            return StartTrace(tuple(x0.tolist()), reason=str(e))

    traces = parallel_map(run, points, threads)
    usable = [t for t in traces if not t.failed]
    if not usable:
        raise OptimizationError(f"all {starts} starts failed for {Q.name}", traces)
    best = min(usable, key=lambda t: t.value)
    logger.info("Minimized %s with %s from %d starts: %.6e at %s", Q.name, method, starts,
                best.value, format_point(best.point))
    return OptimizationResult(Q.name, method, best.point, best.value, traces)


@dataclass
class Certificate:
    candidate: tuple
    a: float
    s: float
    holds: bool
    worst_margin: float
    witness: tuple
    samples: int
    margins: pd.DataFrame = field(repr=False, default=None)

    def to_dict(self):
        return {"candidate": list(self.candidate), "a": self.a, "s": self.s, "holds": self.holds,
                "worst_margin": self.worst_margin, "witness": list(self.witness), "samples": self.samples}


def certify_unconstrained(Q, G, s, a, m, n_grid=None):
    """
    Sample the sufficient optimality condition at a candidate m

    margin(n) = grad Q(m) . (n - m) - G(n, m, s) - 3 Q(m) / a. The
    certificate holds iff every margin is strictly positive; m itself is
    always among the sampled n.

    Args:
        Q: FunctionSpec
        G: ModMap
        s: Parameter in (0, 1]
        a: Parameter strictly inside (0, 1)
        m: Candidate point in the domain
        n_grid: Points n of shape (K, n); default the 21-per-axis grid of the domain

    Returns:
        Certificate: Verdict with the worst margin and its n
    """
    s = core.check_s(s)
    a = core.check_a(a)
    if not 0.0 < a < 1.0:
        raise ParameterError(f"the certificate needs a strictly inside (0, 1), got {a!r}")
    m = core.as_point(m, Q.dimension)
    if not Q.domain.contains(m):
        raise ParameterError(f"candidate {m.tolist()} lies outside the domain of {Q.name}")
    if n_grid is None:
        n_grid = Q.domain.axis_points(core.DEFAULT_POINTS_PER_AXIS)
    n_grid = np.atleast_2d(np.asarray(n_grid, dtype=float))
    if n_grid.shape[1] != Q.dimension:
        raise ParameterError(f"n-grid has dimension {n_grid.shape[1]}, expected {Q.dimension}")
    n_grid = np.unique(np.vstack([n_grid, m[None, :]]), axis=0)

    q_m = Q.value(m)
    if q_m <= 0:
        logger.warning("Certificate candidate %s has Q(m) = %.3e <= 0", format_point(m), q_m)
    grad = diff.gradient(Q, m).values
    candidates = np.repeat(m[None, :], len(n_grid), axis=0)
    margins = (n_grid - m) @ grad - G.values(n_grid, candidates, s) - 3.0 * q_m / a
    worst = int(np.argmin(margins))
    table = pd.DataFrame(n_grid, columns=[f"n_{i}" for i in range(1, Q.dimension + 1)])
    table["margin"] = margins
    certificate = Certificate(tuple(m.tolist()), a, s, bool(margins[worst] > 0), float(margins[worst]),
                              tuple(n_grid[worst].tolist()), len(n_grid), table)
    logger.info("Certificate at %s: %s (worst margin %.6e at %s)", format_point(m),
                "holds" if certificate.holds else "fails", certificate.worst_margin, format_point(certificate.witness))
    return certificate


def consistency_findings(Q, certificate, n_grid, tolerance=core.DEFAULT_TOLERANCE):
    """
    Sampled points that beat a certified candidate

    A holding certificate claims Q(m) <= Q(n) on the grid; any n with a
    smaller value is logged as a finding, not raised.

    Returns:
        list: Points n with Q(n) < Q(m) - tolerance
    """
    if not certificate.holds:
        return []
    n_grid = np.atleast_2d(np.asarray(n_grid, dtype=float))
    q_m = Q.value(certificate.candidate)
    better = n_grid[Q.values(n_grid) < q_m - tolerance]
    for n in better[:10]:
        logger.warning("Certified candidate %s is beaten at %s", format_point(certificate.candidate), format_point(n))
    return [tuple(n.tolist()) for n in better]


def build_report(results=(), certificates=()):
    """
    Aggregate solver results and certificates into a serializable report

    Args:
        results: OptimizationResult objects
        certificates: Certificate objects

    Returns:
        dict: results, certificates and an overall status string
    """
    results = list(results)
    certificates = list(certificates)
    if not results and not certificates:
        raise ParameterError("a report needs at least one result or certificate")
    supported = any(c.holds for c in certificates)
    return {
        "results": [r.to_dict() for r in results],
        "certificates": [c.to_dict() for c in certificates],
        "status": STATUS_SUPPORTED if supported else STATUS_NONE,
    }
