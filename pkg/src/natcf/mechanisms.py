"""Invertible structural mechanisms v = g(pa) + s*u with additive noise."""

from __future__ import annotations

import math

from . import expressions as ex
from .errors import ArityMismatch, ConstantMechanism, NonMonotoneNoise, UnsupportedMeasure
from .noise import StandardNormal, get_noise


class Mechanism:
    """Additive-noise mechanism over an ordered parent list.

    The canonical form v = g(pa) + s*u (s > 0, constant) makes inversion
    exact and keeps the map strictly increasing in u.
    """

    def __init__(self, g: ex.Node, scale: float, parent_order, noise=None):
        if not scale > 0.0:
            raise NonMonotoneNoise(f"noise scale must be positive, got {scale}")
        self.g = g
        self.scale = float(scale)
        self.parent_order = tuple(parent_order)
        self.noise = noise if noise is not None else StandardNormal()
        self.is_constant = False

    def _env(self, pa):
        if len(pa) != len(self.parent_order):
            raise ArityMismatch(
                f"expected {len(self.parent_order)} parent values, got {len(pa)}"
            )
        return dict(zip(self.parent_order, pa))

    def g_value(self, env):
        return self.g.eval(env)

    def g_value_and_partials(self, env):
        return self.g.eval_with_partials(env)

    def forward(self, pa, u):
        return self.g.eval(self._env(pa)) + self.scale * u

    def inverse(self, pa, v):
        return (v - self.g.eval(self._env(pa))) / self.scale

    def conditional_cdf(self, v, pa):
        return self.noise.cdf(self.inverse(pa, v))

    def conditional_entropy_and_logdensity(self, v, pa):
        """(H(V|pa), log p(v|pa)), both in nats."""
        if not hasattr(self.noise, "logpdf"):
            raise UnsupportedMeasure(f"noise {self.noise.name!r} has no density")
        log_s = math.log(self.scale)
        entropy = self.noise.entropy + log_s
        logdensity = self.noise.logpdf(self.inverse(pa, v)) - log_s
        return entropy, logdensity

    def to_text(self) -> str:
        g_text = self.g.to_text()
        u_term = "u" if self.scale == 1.0 else f"{ex.format_number(self.scale)}*u"
        if isinstance(self.g, ex.Const) and self.g.value == 0.0:
            return u_term
        return f"{g_text} + {u_term}"


class ConstantMech:
    """Mechanism replaced by an intervention: v = c, parents dropped.

    Naturalness is never evaluated on intervened nodes, so the conditional
    distribution queries are errors by design.
    """

    def __init__(self, value: float):
        self.value = float(value)
        self.parent_order = ()
        self.is_constant = True

    def forward(self, pa, u):
        return self.value

    def inverse(self, pa, v):
        raise ConstantMechanism("intervened mechanism has no inverse")

    def conditional_cdf(self, v, pa):
        raise ConstantMechanism("naturalness undefined on an intervened node")

    def conditional_entropy_and_logdensity(self, v, pa):
        raise ConstantMechanism("density undefined on an intervened node")


def parse_mechanism(text: str, parents, noise: str = "standard_normal") -> Mechanism:
    """Parse an expression into canonical additive-noise form.

    Rejects expressions where the noise symbol is absent, repeated, enters
    non-additively, or carries a non-positive coefficient.
    """
    tree = ex.parse_expression(text, parents)
    n_noise = tree.noise_count()
    if n_noise == 0:
        raise NonMonotoneNoise("mechanism has no noise term")
    if n_noise > 1:
        raise NonMonotoneNoise("noise symbol may occur only once")
    g, scale = ex.split_noise(tree)
    return Mechanism(g, scale, parents, noise=get_noise(noise))
