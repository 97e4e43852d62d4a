"""
Shared domain types and the kernel weights of the defining inequality

    Q(a m1 + (1-a) m2) <= (e^a - 1)^s Q(m1) + (e^(1-a) - 1)^s Q(m2) + a G(m1, m2, s)

Points are 1-D float numpy arrays; s and a are plain floats checked by
`check_s` / `check_a` at every public entry point.
"""
import dataclasses
import logging
import math
import numbers
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

import expr
from errors import ParameterError, PreconditionError

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9
DEFAULT_POINTS_PER_AXIS = 21
DEFAULT_A_STEPS = 21


def check_s(s):
    """Validate s in (0, 1]"""
    if not (isinstance(s, numbers.Real) and math.isfinite(s) and 0 < s <= 1):
        raise ParameterError(f"s must lie in (0, 1], got {s!r}")
    return float(s)


def check_a(a):
    """Validate a in [0, 1]"""
    if not (isinstance(a, numbers.Real) and math.isfinite(a) and 0 <= a <= 1):
        raise ParameterError(f"a must lie in [0, 1], got {a!r}")
    return float(a)


def check_tolerance(tolerance):
    if not (isinstance(tolerance, numbers.Real) and math.isfinite(tolerance) and tolerance >= 0):
        raise ParameterError(f"tolerance must be a finite non-negative number, got {tolerance!r}")
    return float(tolerance)


def as_point(values, dimension=None):
    """
    Convert coordinates to a finite 1-D float array

    Args:
        values: Sequence of coordinates (or a scalar for n = 1)
        dimension: Expected dimension, if known

    Returns:
        np.ndarray: The point
    """
    point = np.atleast_1d(np.asarray(values, dtype=float))
    if point.ndim != 1 or point.size == 0:
        raise ParameterError(f"a point must be a non-empty vector, got {values!r}")
    if not np.all(np.isfinite(point)):
        raise ParameterError(f"point coordinates must be finite, got {values!r}")
    if dimension is not None and point.size != dimension:
        raise ParameterError(f"point {values!r} has dimension {point.size}, expected {dimension}")
    return point


def mix_points(m1, m2, a):
    """a m1 + (1 - a) m2, broadcasting over leading axes"""
    return a * m1 + (1.0 - a) * m2


@dataclass(frozen=True)
class BoxDomain:
    """Product of closed intervals [lower_i, upper_i]; convex by construction."""
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if not lower or len(lower) != len(upper):
            raise ParameterError("box bounds must be non-empty and of equal length")
        for lo, hi in zip(lower, upper):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ParameterError(f"invalid interval [{lo}, {hi}]")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def from_bounds(cls, bounds):
        """Build from [[lo_1, hi_1], ..., [lo_n, hi_n]]"""
        try:
            return cls(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds))
        except (TypeError, IndexError) as e:
            raise ParameterError(f"box bounds must be a list of [lo, hi] pairs, got {bounds!r}") from e

    @property
    def dimension(self):
        return len(self.lower)

    def bounds(self):
        return [[lo, hi] for lo, hi in zip(self.lower, self.upper)]

    def contains(self, point, tolerance=0.0):
        point = np.asarray(point, dtype=float)
        return bool(np.all(point >= np.asarray(self.lower) - tolerance)
                    and np.all(point <= np.asarray(self.upper) + tolerance))

    def clamp(self, points):
        return np.clip(points, self.lower, self.upper)

    def center(self):
        return (np.asarray(self.lower) + np.asarray(self.upper)) / 2.0

    def axis_points(self, count):
        """Tensor grid with `count` points per axis, in lexicographic order."""
        axes = [np.linspace(lo, hi, count) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample_uniform(self, rng, count):
        return rng.uniform(self.lower, self.upper, size=(count, self.dimension))


@dataclass(frozen=True)
class FunctionSpec:
    """The function Q: a parsed body over x1..xn and its box domain V."""
    name: str
    body: expr.ExprAst
    domain: BoxDomain

    def __post_init__(self):
        if self.body.variable_set != expr.FUNCTION_VARIABLES:
            raise ParameterError(f"function '{self.name}' must be written in x1..xn")
        if self.body.dimension != self.domain.dimension:
            raise ParameterError(f"function '{self.name}' has dimension {self.body.dimension} "
                                 f"but its domain has dimension {self.domain.dimension}")

    @classmethod
    def from_text(cls, name, text, bounds):
        domain = BoxDomain.from_bounds(bounds)
        return cls(name, expr.parse(text, domain.dimension, expr.FUNCTION_VARIABLES), domain)

    @property
    def dimension(self):
        return self.domain.dimension

    def value(self, point):
        return expr.evaluate(self.body, point)

    def values(self, points):
        return expr.evaluate_array(self.body, points)

    def __str__(self):
        return expr.to_text(self.body)


@dataclass(frozen=True)
class ModMap:
    """The modulating map G(m1, m2, s), written in u1..un, v1..vn and s."""
    name: str
    body: expr.ExprAst

    def __post_init__(self):
        if self.body.variable_set != expr.MODMAP_VARIABLES:
            raise ParameterError(f"modulating map '{self.name}' must be written in u, v and s")

    @classmethod
    def from_text(cls, name, text, dimension):
        return cls(name, expr.parse(text, dimension, expr.MODMAP_VARIABLES))

    @classmethod
    def constant(cls, value, dimension, name=None):
        return cls(name or f"G={value!r}", expr.constant(value, dimension, expr.MODMAP_VARIABLES))

    @classmethod
    def zero(cls, dimension):
        return cls.constant(0.0, dimension, name="G=0")

    @property
    def dimension(self):
        return self.body.dimension

    def value(self, m1, m2, s):
        return expr.evaluate(self.body, m1, m2, s=s)

    def values(self, m1s, m2s, s):
        return expr.evaluate_array(self.body, m1s, m2s, s=s)

    def __str__(self):
        return expr.to_text(self.body)


def a_grid(steps):
    """Uniform grid on [0, 1] with both endpoints"""
    if not isinstance(steps, int) or steps < 2:
        raise ParameterError(f"an a-grid needs at least 2 points, got {steps!r}")
    return tuple(float(a) for a in np.linspace(0.0, 1.0, steps))


@dataclass(frozen=True)
class SampleGrid:
    """
    Deterministic sampling plan for sweeps

    m-samples are a tensor grid with `points_per_axis` points per axis plus
    `refine` points drawn uniformly from the box with `seed`. Every ordered
    pair (m1, m2) of m-samples is swept against every a and s.
    """
    points_per_axis: int = DEFAULT_POINTS_PER_AXIS
    a_values: tuple = a_grid(DEFAULT_A_STEPS)
    s_values: tuple = (1.0,)
    seed: int = 0
    refine: int = 0

    def __post_init__(self):
        if not isinstance(self.points_per_axis, int) or self.points_per_axis < 1:
            raise ParameterError(f"points_per_axis must be a positive integer, got {self.points_per_axis!r}")
        if not isinstance(self.refine, int) or self.refine < 0:
            raise ParameterError(f"refine must be a non-negative integer, got {self.refine!r}")
        a_values = tuple(sorted(set(check_a(a) for a in self.a_values)))
        if not a_values or a_values[0] != 0.0 or a_values[-1] != 1.0:
            raise ParameterError("the a-grid must contain both endpoints 0 and 1")
        s_values = tuple(sorted(set(check_s(s) for s in self.s_values)))
        if not s_values:
            raise ParameterError("the s-list is empty")
        object.__setattr__(self, "a_values", a_values)
        object.__setattr__(self, "s_values", s_values)

    def with_s(self, s_values):
        return dataclasses.replace(self, s_values=tuple(s_values))

    def m_points(self, domain):
        """Sorted, de-duplicated m-samples of shape (K, n)"""
        points = domain.axis_points(self.points_per_axis)
        if self.refine:
            rng = np.random.default_rng(self.seed)
            points = np.vstack([points, domain.sample_uniform(rng, self.refine)])
        return np.unique(points, axis=0)


class WeightPair(NamedTuple):
    w1: float
    w2: float


def _kernel(t, s):
    """(e^t - 1)^s as exp(s ln(e^t - 1)), defined as 0 at t = 0"""
    base = np.expm1(t)
    positive = base > 0
    safe = np.where(positive, base, 1.0)
    return np.where(positive, np.exp(s * np.log(safe)), 0.0)


def weights(a, s):
    """
    Kernel weights ((e^a - 1)^s, (e^(1-a) - 1)^s)

    Args:
        a: Mixing parameter in [0, 1] (scalar or array)
        s: Parameter in (0, 1] (scalar or array)

    Returns:
        WeightPair: floats for scalar input, arrays otherwise
    """
    a_arr = np.asarray(a, dtype=float)
    s_arr = np.asarray(s, dtype=float)
    if not np.all((a_arr >= 0) & (a_arr <= 1)):
        raise ParameterError(f"a must lie in [0, 1], got {a!r}")
    if not np.all((s_arr > 0) & (s_arr <= 1)):
        raise ParameterError(f"s must lie in (0, 1], got {s!r}")
    w1 = _kernel(a_arr, s_arr)
    w2 = _kernel(1.0 - a_arr, s_arr)
    if w1.ndim == 0:
        return WeightPair(float(w1), float(w2))
    return WeightPair(w1, w2)


def lemma_margins(a, s):
    """(w1 - a, w2 - (1 - a)); both are non-negative for every admissible (a, s)"""
    w1, w2 = weights(a, s)
    if np.ndim(a):
        a = np.asarray(a, dtype=float)
    return w1 - a, w2 - (1.0 - a)


SIGNS = {
    "positive": lambda v: v > 0,
    "non-negative": lambda v: v >= 0,
    "non-positive": lambda v: v <= 0,
    "negative": lambda v: v < 0,
}


def require_sign(values, sign, what, points=None):
    """
    Strict sign guard applied before any check whose hypothesis needs it

    Args:
        values: Function values at the sampled points
        sign: One of SIGNS
        what: Description used in the error message
        points: Sampled points, to name the offending one

    Raises:
        PreconditionError: Some value has the wrong sign
    """
    values = np.atleast_1d(np.asarray(values, dtype=float))
    bad = ~SIGNS[sign](values)
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        where = f" at {points[index].tolist()}" if points is not None else ""
        raise PreconditionError(f"{what} must be {sign} on the sampled points; "
                                f"found {values[index]!r}{where}")
    logger.debug("Sign guard '%s' passed on %d values for %s", sign, values.size, what)
