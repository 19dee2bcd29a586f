"""Perfect interventions, parametric intervention families and their partial order."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import PreconditionError, ValidationError

#: Largest family enumerated exhaustively / largest grid generated per family.
MAX_ENUMERATION = 1000


def _fmt(v):
    return format(v, "g")


class Intervention:
    """A perfect intervention ``do(X_J = x_J)``; the empty mapping is the null intervention.

    Targets are kept sorted by name so equal interventions hash equally.
    """

    __slots__ = ("_targets",)

    def __init__(self, targets: Mapping[str, float] = None):
        targets = dict(targets or {})
        items = []
        for name, value in targets.items():
            v = float(value)
            if not math.isfinite(v):
                raise ValidationError(f"intervention value for {name} is not finite")
            items.append((str(name), v + 0.0))
        object.__setattr__(self, "_targets", tuple(sorted(items)))

    def __setattr__(self, *_):
        raise AttributeError("Intervention is immutable")

    @classmethod
    def null(cls):
        return cls()

    @property
    def targets(self) -> dict:
        return dict(self._targets)

    @property
    def names(self) -> frozenset:
        return frozenset(n for n, _ in self._targets)

    @property
    def is_null(self):
        return not self._targets

    def __len__(self):
        return len(self._targets)

    def __eq__(self, other):
        return isinstance(other, Intervention) and self._targets == other._targets

    def __hash__(self):
        return hash(self._targets)

    def __repr__(self):
        return f"Intervention({self.targets!r})"

    def __str__(self):
        if not self._targets:
            return "∅"
        return "do(" + ", ".join(f"{n}={_fmt(v)}" for n, v in self._targets) + ")"


def leq(i: Intervention, j: Intervention) -> bool:
    """``i <= j``: ``j`` sets every variable ``i`` sets, to the same value."""
    jt = j.targets
    return all(name in jt and jt[name] == v for name, v in i._targets)


# --------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class FiniteDomain:
    values: tuple

    def __post_init__(self):
        vals = tuple(sorted({float(v) + 0.0 for v in self.values}))
        if not vals:
            raise ValidationError("finite domain is empty")
        object.__setattr__(self, "values", vals)

    bounded = True

    def contains(self, v):
        return float(v) in self.values

    @property
    def size(self):
        return len(self.values)

    def grid(self, k):
        if len(self.values) <= k:
            return self.values
        idx = sorted({int(round(t)) for t in np.linspace(0, len(self.values) - 1, k)})
        return tuple(self.values[t] for t in idx)

    def draw(self, rng):
        return float(self.values[rng.integers(len(self.values))])


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if not self.lo <= self.hi:
            raise ValidationError(f"interval [{self.lo}, {self.hi}] is empty")

    @property
    def bounded(self):
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, v):
        return self.lo <= float(v) <= self.hi

    def grid(self, k):
        if self.lo == self.hi:
            return (self.lo,)
        if k == 1:
            return ((self.lo + self.hi) / 2,)
        return tuple(float(x) for x in np.linspace(self.lo, self.hi, k))

    def draw(self, rng):
        lo_inf, hi_inf = math.isinf(self.lo), math.isinf(self.hi)
        if not lo_inf and not hi_inf:
            return float(rng.uniform(self.lo, self.hi))
        z = float(rng.standard_normal())
        if lo_inf and hi_inf:
            return z
        return self.lo + abs(z) if hi_inf else self.hi - abs(z)


Domain = FiniteDomain | Interval


@dataclass(frozen=True)
class InterventionFamily:
    """All interventions setting exactly ``targets``, each value drawn from its domain."""

    label: str
    targets: tuple
    domains: tuple

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "domains", tuple(self.domains))
        if len(self.targets) != len(self.domains):
            raise ValidationError(f"family {self.label!r}: {len(self.targets)} targets but "
                                  f"{len(self.domains)} domains")
        if len(set(self.targets)) != len(self.targets):
            raise ValidationError(f"family {self.label!r} repeats a target")

    @classmethod
    def single(cls, label, intervention: Intervention):
        t = intervention.targets
        return cls(label, tuple(t), tuple(FiniteDomain((v,)) for v in t.values()))

    @property
    def key(self):
        return tuple(sorted(zip(self.targets, self.domains), key=lambda p: p[0]))

    @property
    def is_null(self):
        return not self.targets

    @property
    def enumerable(self):
        if not all(isinstance(d, FiniteDomain) for d in self.domains):
            return False
        return math.prod(d.size for d in self.domains) <= MAX_ENUMERATION

    def contains(self, i: Intervention):
        t = i.targets
        if set(t) != set(self.targets):
            return False
        return all(d.contains(t[n]) for n, d in zip(self.targets, self.domains))

    def values_of(self, i: Intervention):
        t = i.targets
        return tuple(t[n] for n in self.targets)

    def make(self, values):
        return Intervention(dict(zip(self.targets, values)))

    def enumerate(self):
        for combo in itertools.product(*(d.values for d in self.domains)):
            yield self.make(combo)


class InterventionCatalog:
    """The catalog ``I_X`` as an ordered tuple of labelled families."""

    def __init__(self, families=()):
        self.families = tuple(families)
        labels = [f.label for f in self.families]
        dup = {l for l in labels if labels.count(l) > 1}
        if dup:
            raise ValidationError(f"duplicate family labels {sorted(dup)}")
        keys = [f.key for f in self.families]
        for a, b in itertools.combinations(range(len(keys)), 2):
            if keys[a] == keys[b]:
                raise ValidationError(f"families {labels[a]!r} and {labels[b]!r} are identical")

    @classmethod
    def from_interventions(cls, interventions, labels=None):
        """Catalog of singleton families, one per concrete intervention."""
        interventions = [i if isinstance(i, Intervention) else Intervention(i) for i in interventions]
        if labels is None:
            labels = ["null" if i.is_null else str(i) for i in interventions]
        return cls(InterventionFamily.single(l, i) for l, i in zip(labels, interventions))

    def __iter__(self):
        return iter(self.families)

    def __len__(self):
        return len(self.families)

    def __eq__(self, other):
        return isinstance(other, InterventionCatalog) and self.families == other.families

    def __repr__(self):
        return f"InterventionCatalog({list(self.families)!r})"

    @property
    def null_family(self):
        return next((f for f in self.families if f.is_null), None)

    @property
    def targets_used(self) -> set:
        return {t for f in self.families for t in f.targets}

    @property
    def labels(self):
        return tuple(f.label for f in self.families)

    def by_label(self, label):
        for f in self.families:
            if f.label == label:
                return f
        raise KeyError(label)

    def family_of(self, i: Intervention):
        """First family (in catalog order) containing ``i``, or ``None``."""
        return next((f for f in self.families if f.contains(i)), None)

    def contains(self, i: Intervention):
        return self.family_of(i) is not None

    def above(self, i: Intervention) -> "InterventionCatalog":
        """Sub-catalog ``{j : i <= j}``, with ``i`` itself acting as the new null."""
        if i.is_null:
            return self
        t = i.targets
        null = self.null_family
        out = [InterventionFamily(null.label if null else "null", (), ())]
        seen = {out[0].key}
        for f in self.families:
            if not set(t) <= set(f.targets):
                continue
            if not all(d.contains(t[n]) for n, d in zip(f.targets, f.domains) if n in t):
                continue
            pinned = InterventionFamily(
                f.label, f.targets,
                tuple(FiniteDomain((t[n],)) if n in t else d for n, d in zip(f.targets, f.domains)))
            if pinned.key not in seen:
                seen.add(pinned.key)
                out.append(pinned)
        return InterventionCatalog(out)


# --------------------------------------------------------------------------
# probing


@dataclass(frozen=True)
class ProbeSet:
    """Finite witness set drawn from a catalog.

    ``pairs`` holds every ``(i, j)`` with ``leq(i, j)`` and ``i != j``;
    ``exhaustive`` is true when every family was enumerated completely.
    """

    probes: tuple
    labels: tuple
    pairs: tuple
    exhaustive: bool


def _family_points(family, grid, n_random, rng):
    if family.is_null:
        return [Intervention()], True
    if family.enumerable:
        return list(family.enumerate()), True
    points = []
    if all(d.bounded for d in family.domains):
        axes = [d.grid(grid) for d in family.domains]
        if math.prod(len(a) for a in axes) <= MAX_ENUMERATION:
            points.extend(family.make(c) for c in itertools.product(*axes))
    for _ in range(n_random):
        points.append(family.make(tuple(d.draw(rng) for d in family.domains)))
    if not points:
        points.append(family.make(tuple(d.draw(rng) for d in family.domains)))
    return points, False


def probe_catalog(catalog: InterventionCatalog, grid_points_per_axis: int = 3,
                  random_points: int = 5, seed: int = 0) -> ProbeSet:
    """Finite set of concrete interventions exercising every family of ``catalog``.

    Finite families with at most :data:`MAX_ENUMERATION` members are enumerated.
    Other families get a regular grid (bounded axes only, capped at
    :data:`MAX_ENUMERATION` points) plus ``random_points`` random members;
    unbounded axes are drawn from a standard normal.  The null intervention is
    always the first probe.
    """
    if not len(catalog):
        raise PreconditionError("cannot probe an empty intervention catalog")
    probes = {Intervention(): "null" if catalog.null_family is None else catalog.null_family.label}
    exhaustive = True
    for idx, family in enumerate(catalog):
        rng = np.random.default_rng([seed, idx])
        points, complete = _family_points(family, grid_points_per_axis, random_points, rng)
        exhaustive &= complete
        for p in points:
            probes.setdefault(p, family.label)
    plist = tuple(probes)
    return ProbeSet(plist, tuple(probes.values()), comparable_pairs(plist), exhaustive)


def comparable_pairs(interventions):
    """All ``(i, j)`` with ``i != j`` and ``i <= j``, in the order of a double loop over the input.

    Interventions are bucketed by target set so only buckets related by inclusion
    are compared, and matches are found by looking up the restricted values.
    """
    items = list(interventions)
    pos = {i: k for k, i in enumerate(items)}
    buckets = {}
    for i in items:
        buckets.setdefault(i.names, []).append(i)
    found = []
    for small, lows in buckets.items():
        names = sorted(small)
        index = {}
        for i in lows:
            index.setdefault(tuple(i.targets[n] for n in names), []).append(i)
        for big, highs in buckets.items():
            if not small <= big:
                continue
            for j in highs:
                t = j.targets
                for i in index.get(tuple(t[n] for n in names), ()):
                    if i != j:
                        found.append((pos[i], pos[j]))
    found.sort()
    return tuple((items[a], items[b]) for a, b in found)
