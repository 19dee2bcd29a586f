"""Exogenous noise: independent base noises plus a deterministic exogenous map.

Dependent exogenous variables are expressed by letting several exogenous ids
read the same base noise, e.g. ``E2 = -U1`` alongside ``E1 = U1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import NotApplicableError, ValidationError
from .expr import Exo, affine_form, evaluate, exogenous_in, to_string, variables_in


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"Bernoulli p={self.p} outside [0, 1]")

    def sample(self, rng, n):
        return (rng.random(n) < self.p).astype(float)

    gaussian = False


@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        if self.var < 0:
            raise ValidationError(f"Normal variance {self.var} is negative")

    def sample(self, rng, n):
        return self.mean + np.sqrt(self.var) * rng.standard_normal(n)

    gaussian = True

    def moments(self):
        return self.mean, self.var


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValidationError(f"Uniform bounds [{self.low}, {self.high}] are empty")

    def sample(self, rng, n):
        return rng.uniform(self.low, self.high, n)

    gaussian = False


@dataclass(frozen=True)
class PointMass:
    value: float

    def sample(self, rng, n):
        return np.full(n, float(self.value))

    gaussian = True

    def moments(self):
        return float(self.value), 0.0


@dataclass(frozen=True)
class NoiseModel:
    """Base noises (mutually independent) and exogenous ids defined over them.

    Parameters
    ----------
    base : mapping of name -> distribution
        Sampled in declaration order; the order is part of the seed contract.
    exogenous : mapping of name -> Expr
        Each expression references base noises only, through :class:`Exo` nodes.
    """

    base: Mapping = field(default_factory=dict)
    exogenous: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "base", dict(self.base))
        object.__setattr__(self, "exogenous", dict(self.exogenous))
        clash = set(self.base) & set(self.exogenous)
        if clash:
            raise ValidationError(f"names used for both base noise and exogenous id: {sorted(clash)}")
        for name, e in self.exogenous.items():
            if variables_in(e):
                raise ValidationError(f"exogenous map references variables {list(variables_in(e))}",
                                      f"exogenous.map.{name}")
            for ref in exogenous_in(e):
                if ref not in self.base:
                    raise ValidationError(f"undeclared base noise {ref!r}", f"exogenous.map.{name}")

    @property
    def exo_names(self):
        return tuple(self.exogenous)

    def sample(self, n: int, rng) -> dict:
        """Draw ``n`` joint samples of every exogenous id."""
        base = {name: dist.sample(rng, n) for name, dist in self.base.items()}
        out = {}
        for name, e in self.exogenous.items():
            v = evaluate(e, base)
            out[name] = np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
        return out

    def evaluate(self, base_values: Mapping) -> dict:
        return {name: evaluate(e, base_values) for name, e in self.exogenous.items()}

    def restrict(self, exo_names) -> "NoiseModel":
        """Keep only ``exo_names`` and the base noises they read."""
        keep = [n for n in self.exogenous if n in set(exo_names)]
        used = set()
        for n in keep:
            used.update(exogenous_in(self.exogenous[n]))
        return NoiseModel({b: d for b, d in self.base.items() if b in used},
                          {n: self.exogenous[n] for n in keep})

    def gaussian_moments(self, exo_names):
        """Mean vector and covariance of ``exo_names`` when jointly Gaussian.

        Raises :class:`NotApplicableError` if an exogenous map is not affine in
        the base noises or a base noise it reads is neither normal nor a point mass.
        """
        base_names = list(self.base)
        index = {b: k for k, b in enumerate(base_names)}
        loading = np.zeros((len(exo_names), len(base_names)))
        offset = np.zeros(len(exo_names))
        for r, name in enumerate(exo_names):
            form = affine_form(self.exogenous[name])
            if form is None:
                raise NotApplicableError(f"exogenous map {name} = {to_string(self.exogenous[name])} is not affine")
            coefs, c = form
            offset[r] = c
            for node, coef in coefs.items():
                if not isinstance(node, Exo):
                    raise NotApplicableError(f"exogenous map {name} references a variable")
                loading[r, index[node.name]] += coef
        bmean = np.zeros(len(base_names))
        bvar = np.zeros(len(base_names))
        for k, b in enumerate(base_names):
            if not np.any(loading[:, k]):
                continue
            dist = self.base[b]
            if not dist.gaussian:
                raise NotApplicableError(f"base noise {b} is {type(dist).__name__}, not Gaussian")
            bmean[k], bvar[k] = dist.moments()
        mean = offset + loading @ bmean
        cov = (loading * bvar) @ loading.T
        return mean, cov
