"""Noise distributions for structural mechanisms.

Only the standard normal is shipped; the registry leaves room for more.
All functions accept scalars or numpy arrays and are vectorized.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import UnknownVariable

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class StandardNormal:
    """N(0, 1) with machine-precision cdf/quantile (Cephes ndtr/ndtri)."""

    name = "standard_normal"
    entropy = 0.5 * math.log(2.0 * math.pi * math.e)

    @staticmethod
    def pdf(u):
        return np.exp(-0.5 * np.square(u) - _HALF_LOG_2PI)

    @staticmethod
    def logpdf(u):
        return -0.5 * np.square(u) - _HALF_LOG_2PI

    @staticmethod
    def cdf(u):
        return special.ndtr(u)

    @staticmethod
    def sf(u):
        # Survival function via the mirrored cdf: full relative precision in
        # the upper tail, where 1 - cdf(u) would round to ulp(1) granularity.
        return special.ndtr(-np.asarray(u)) if np.ndim(u) else special.ndtr(-u)

    @staticmethod
    def quantile(p):
        return special.ndtri(p)

    @staticmethod
    def tail_min(u):
        """min(cdf(u), 1 - cdf(u)), computed symmetrically."""
        return special.ndtr(-np.abs(u))


_REGISTRY = {StandardNormal.name: StandardNormal()}


def get_noise(name: str):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownVariable(f"unknown noise distribution {name!r}") from None
