"""
Closure constructions on (Q, G) pairs: sums, non-negative scaling, linear
combinations, post-composition with a non-negative linear map, and the
pointwise supremum of a finite family.

Every constructor returns new immutable expression trees; nothing is
evaluated until the composite is swept.
"""
import logging
import math
import numbers
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

import expr
from core import BoxDomain, FunctionSpec, ModMap
from errors import EvaluationDomainError, ParameterError

logger = logging.getLogger(__name__)

DEFAULT_PROBE_POINTS = 101


@dataclass(frozen=True)
class GSPair:
    """A function together with the modulating map it is checked against."""
    Q: FunctionSpec
    G: ModMap

    def __post_init__(self):
        if self.Q.dimension != self.G.dimension:
            raise ParameterError(f"pair ({self.Q.name}, {self.G.name}) mixes dimensions "
                                 f"{self.Q.dimension} and {self.G.dimension}")

    @property
    def domain(self):
        return self.Q.domain

    @property
    def dimension(self):
        return self.Q.dimension


def _coefficient(value, what):
    if not (isinstance(value, numbers.Real) and math.isfinite(value) and value >= 0):
        raise ParameterError(f"{what} must be a finite non-negative number, got {value!r}")
    return float(value)


def _same_domain(pairs):
    domain = pairs[0].domain
    for pair in pairs[1:]:
        if pair.domain != domain:
            raise ParameterError(f"domains differ: {domain.bounds()} vs {pair.domain.bounds()}")
    return domain


def combine_sum(p1, p2):
    """
    (Q1 + Q2, G1 + G2)

    Args:
        p1: GSPair
        p2: GSPair on the same domain

    Returns:
        GSPair: Composite pair whose residual is the sum of the inputs' residuals
    """
    domain = _same_domain([p1, p2])
    Q = FunctionSpec(f"({p1.Q.name} + {p2.Q.name})", expr.sum_of(p1.Q.body, p2.Q.body), domain)
    G = ModMap(f"({p1.G.name} + {p2.G.name})", expr.sum_of(p1.G.body, p2.G.body))
    return GSPair(Q, G)


def scale(p, beta):
    """
    (beta Q, beta G) for beta >= 0

    Args:
        p: GSPair
        beta: Non-negative coefficient

    Returns:
        GSPair: Residuals scale by exactly beta
    """
    beta = _coefficient(beta, "beta")
    Q = FunctionSpec(f"{beta:g}*{p.Q.name}", expr.scaled(beta, p.Q.body), p.domain)
    G = ModMap(f"{beta:g}*{p.G.name}", expr.scaled(beta, p.G.body))
    return GSPair(Q, G)


def linear_combination(pairs, betas):
    """
    (sum beta_i Q_i, sum beta_i G_i), built as iterated scale then combine_sum

    Args:
        pairs: Non-empty list of GSPair on a common domain
        betas: Non-negative coefficients, one per pair

    Returns:
        GSPair: The combination
    """
    pairs = list(pairs)
    betas = list(betas)
    if not pairs:
        raise ParameterError("linear combination of an empty family")
    if len(pairs) != len(betas):
        raise ParameterError(f"{len(pairs)} pairs but {len(betas)} coefficients")
    _same_domain(pairs)
    result = scale(pairs[0], betas[0])
    for pair, beta in zip(pairs[1:], betas[1:]):
        result = combine_sum(result, scale(pair, beta))
    return result


def post_compose_linear(p, c):
    """
    Compose (Q, G) with the non-negative linear map x -> c x on the reals

    Same contract as `scale`; the map is represented by its coefficient c.

    Args:
        p: GSPair
        c: Non-negative coefficient of the linear map

    Returns:
        GSPair: (c Q, c G)
    """
    c = _coefficient(c, "linear map coefficient")
    logger.debug("Post-composing %s with x -> %g x", p.Q.name, c)
    return scale(p, c)


class SupFamily(NamedTuple):
    pair: GSPair
    probe: np.ndarray
    finite: np.ndarray
    contiguous: bool


def _probe_finite(Q, point):
    try:
        return math.isfinite(Q.value([point]))
    except EvaluationDomainError:
        return False


def sup_family(pairs, probe=None):
    """
    Pointwise supremum of a finite family of one-dimensional pairs

    The supremum is finite at a probe point when every member evaluates
    there; the finiteness set K is that subset of the probe grid. The
    returned pair is max_i Q_i and max_i G_i on the hull of K.

    Args:
        pairs: Non-empty list of one-dimensional GSPair on a common interval
        probe: Probe points inside the interval; default 101 evenly spaced points

    Returns:
        SupFamily: (pair on hull of K, probe grid, finiteness mask, K contiguous)
    """
    pairs = list(pairs)
    if not pairs:
        raise ParameterError("supremum of an empty family")
    for pair in pairs:
        if pair.dimension != 1:
            raise ParameterError(f"supremum families are one-dimensional; {pair.Q.name} has dimension {pair.dimension}")
    domain = _same_domain(pairs)
    lo, hi = domain.lower[0], domain.upper[0]
    if probe is None:
        probe = np.linspace(lo, hi, DEFAULT_PROBE_POINTS)
    probe = np.asarray(sorted(set(float(r) for r in probe)), dtype=float)
    if probe.size == 0 or probe[0] < lo or probe[-1] > hi:
        raise ParameterError(f"probe points must be a non-empty subset of [{lo}, {hi}]")

    finite = np.array([all(_probe_finite(pair.Q, r) for pair in pairs) for r in probe], dtype=bool)
    indices = np.flatnonzero(finite)
    if indices.size == 0:
        raise ParameterError("the supremum is infinite at every probe point")
    contiguous = bool(np.all(np.diff(indices) == 1))
    if not contiguous:
        logger.warning("Finiteness set of the supremum is not contiguous on the probe grid")

    hull = BoxDomain((probe[indices[0]],), (probe[indices[-1]],))
    names = ", ".join(pair.Q.name for pair in pairs)
    Q = FunctionSpec(f"sup({names})", expr.maximum([pair.Q.body for pair in pairs]), hull)
    G = ModMap(f"sup({', '.join(pair.G.name for pair in pairs)})", expr.maximum([pair.G.body for pair in pairs]))
    logger.info("Supremum of %d members is finite on %d of %d probe points", len(pairs), indices.size, probe.size)
    return SupFamily(GSPair(Q, G), probe, finite, contiguous)
