import numpy as np

from core import FunctionSpec, ModMap

# non-negative convex functions, checked with G = 0
CONVEX_CORPUS = [
    ("square", "x1^2", [[-1, 1]]),
    ("absolute", "abs(x1)", [[-1, 1]]),
    ("exponential", "exp(x1)", [[0, 1]]),
    ("identity", "x1", [[0, 2]]),
    ("paraboloid", "x1^2 + x2^2", [[0, 1], [0, 1]]),
]

E = np.e


def function(text, bounds, name=None):
    return FunctionSpec.from_text(name or text, text, bounds)


def modmap(text, dimension=1, name=None):
    return ModMap.from_text(name or text, text, dimension)
