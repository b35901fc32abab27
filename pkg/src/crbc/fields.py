"""Named catalog of tracking fields y_d and the benchmark configuration.

The CLI restricts y_d to this catalog (no expression parser); extending it
is a one-line change here.  All fields are vectorized over numpy arrays.
"""

import numpy as np

__all__ = ["CATALOG", "get_field", "benchmark_params"]


def _product(x, y):
    """x1*x2 + 1: the benchmark tracking field."""
    return x * y + 1.0


def _one(x, y):
    return np.ones(np.broadcast(x, y).shape)


def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def _sine(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def _harmonic_square(x, y):
    """Real part of (x + iy)^2, harmonic on the plane."""
    return x * x - y * y


CATALOG = {
    "product": _product,
    "one": _one,
    "zero": _zero,
    "sine": _sine,
    "harmonic-square": _harmonic_square,
}


def get_field(name):
    try:
        return CATALOG[name]
    except KeyError:
        raise ValueError(
            f"unknown field {name!r}; available: {', '.join(sorted(CATALOG))}"
        ) from None


def benchmark_params():
    """The benchmark problem on the unit square: y_d = x1*x2 + 1,
    alpha = 0.01, bounds (-0.5, 0.5)."""
    return {"y_d": _product, "alpha": 0.01, "bounds": (-0.5, 0.5)}
