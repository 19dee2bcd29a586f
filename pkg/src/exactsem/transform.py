"""Transformations ``tau``, intervention maps ``omega`` and the exactness checker."""
from __future__ import annotations

import dataclasses
import itertools
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .distributions import EmpiricalLaw, compare_laws, pushforward
from .errors import ExactSemError, NotApplicableError, PreconditionError, StructuralError
from .expr import Var, affine_form, evaluate, exogenous_in, linear_expr, rename, substitute, variables_in
from .interventions import (FiniteDomain, Intervention, InterventionCatalog, InterventionFamily,
                            Interval, leq, probe_catalog)

#: Rule outputs within this distance of a finite-domain value are snapped onto it.
SNAP_TOL = 1e-12
#: Largest Y-family dimension for which box vertices are checked one by one.
MAX_VERTEX_DIM = 12


# --------------------------------------------------------------------------
# tau


@dataclass(frozen=True, eq=False)
class Transformation:
    """A map ``tau: X -> Y`` between coordinate spaces.

    ``kind`` is ``"projection"`` (``indices`` into the source), ``"affine"``
    (``matrix``, ``offset``) or ``"expressions"`` (one expression per target
    coordinate, over source variables only).
    """

    kind: str
    source: tuple
    target: tuple
    indices: tuple = None
    matrix: np.ndarray = None
    offset: np.ndarray = None
    exprs: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(self.source))
        object.__setattr__(self, "target", tuple(self.target))
        if len(set(self.target)) != len(self.target):
            raise StructuralError("transformation target labels repeat")
        if self.kind == "projection":
            idx = tuple(int(k) for k in self.indices)
            object.__setattr__(self, "indices", idx)
            if any(not 0 <= k < len(self.source) for k in idx):
                raise StructuralError("projection index out of range")
            if len(idx) != len(self.target):
                raise StructuralError("projection arity does not match target labels")
        elif self.kind == "affine":
            T = np.atleast_2d(np.asarray(self.matrix, dtype=float))
            if T.size == 0:
                T = T.reshape(len(self.target), len(self.source))
            c = np.zeros(len(self.target)) if self.offset is None else np.asarray(self.offset, dtype=float)
            if T.shape != (len(self.target), len(self.source)) or c.shape != (len(self.target),):
                raise StructuralError(f"affine map of shape {T.shape} does not fit "
                                      f"{len(self.source)} -> {len(self.target)} coordinates")
            object.__setattr__(self, "matrix", T)
            object.__setattr__(self, "offset", c)
        elif self.kind == "expressions":
            exprs = tuple(self.exprs)
            object.__setattr__(self, "exprs", exprs)
            if len(exprs) != len(self.target):
                raise StructuralError("expression count does not match target labels")
            known = set(self.source)
            for name, e in zip(self.target, exprs):
                if exogenous_in(e):
                    raise StructuralError(f"tau.{name} references exogenous ids")
                bad = [v for v in variables_in(e) if v not in known]
                if bad:
                    raise StructuralError(f"tau.{name} references unknown coordinates {bad}")
        else:
            raise StructuralError(f"unknown transformation kind {self.kind!r}")

    @classmethod
    def projection(cls, source, keep):
        source = tuple(source)
        pos = {v: k for k, v in enumerate(source)}
        missing = [v for v in keep if v not in pos]
        if missing:
            raise StructuralError(f"projection keeps unknown coordinates {missing}")
        return cls("projection", source, tuple(keep), indices=tuple(pos[v] for v in keep))

    @classmethod
    def identity(cls, source):
        return cls.projection(source, tuple(source))

    @classmethod
    def affine(cls, source, target, matrix, offset=None):
        return cls("affine", source, target, matrix=matrix, offset=offset)

    @classmethod
    def expressions(cls, source, target, exprs):
        return cls("expressions", source, target, exprs=exprs)

    def apply(self, X):
        """Apply row-wise to an ``n x |source|`` array."""
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != len(self.source):
            raise PreconditionError(f"expected {len(self.source)} columns, got {X.shape[-1]}")
        if self.kind == "projection":
            return X[..., list(self.indices)]
        if self.kind == "affine":
            return X @ self.matrix.T + self.offset
        env = {v: X[..., k] for k, v in enumerate(self.source)}
        cols = [np.broadcast_to(np.asarray(evaluate(e, env), dtype=float), X.shape[:-1])
                for e in self.exprs]
        return np.stack(cols, axis=-1) if cols else np.zeros(X.shape[:-1] + (0,))

    def as_affine(self):
        """``(T, c)`` with ``tau(x) = T x + c``, or ``None`` if ``tau`` is not affine."""
        p, q = len(self.source), len(self.target)
        if self.kind == "projection":
            T = np.zeros((q, p))
            T[np.arange(q), list(self.indices)] = 1.0
            return T, np.zeros(q)
        if self.kind == "affine":
            return self.matrix, self.offset
        pos = {v: k for k, v in enumerate(self.source)}
        T, c = np.zeros((q, p)), np.zeros(q)
        for r, e in enumerate(self.exprs):
            form = affine_form(e)
            if form is None:
                return None
            for node, coef in form[0].items():
                T[r, pos[node.name]] += coef
            c[r] = form[1]
        return T, c

    def to_expressions(self):
        if self.kind == "expressions":
            return self.exprs
        T, c = self.as_affine()
        return tuple(linear_expr([(T[r, k], Var(v)) for k, v in enumerate(self.source)], c[r])
                     for r in range(len(self.target)))

    def then(self, after: "Transformation") -> "Transformation":
        """``after o self``."""
        if after.source != self.target:
            raise PreconditionError(f"cannot chain: {self.target} feeds {after.source}")
        if self.kind == "projection" and after.kind == "projection":
            return Transformation("projection", self.source, after.target,
                                  indices=tuple(self.indices[k] for k in after.indices))
        if self.kind != "expressions" and after.kind != "expressions":
            T1, c1 = self.as_affine()
            T2, c2 = after.as_affine()
            return Transformation.affine(self.source, after.target, T2 @ T1, T2 @ c1 + c2)
        inner = dict(zip(self.target, self.to_expressions()))
        return Transformation.expressions(self.source, after.target,
                                          tuple(substitute(e, inner) for e in after.to_expressions()))

    def __eq__(self, other):
        if not isinstance(other, Transformation):
            return NotImplemented
        if (self.kind, self.source, self.target) != (other.kind, other.source, other.target):
            return False
        if self.kind == "projection":
            return self.indices == other.indices
        if self.kind == "affine":
            return np.array_equal(self.matrix, other.matrix) and np.array_equal(self.offset, other.offset)
        return self.exprs == other.exprs

    __hash__ = None


# --------------------------------------------------------------------------
# omega


@dataclass(frozen=True)
class OmegaRule:
    """Map the X-family ``source`` to the Y-family ``target`` by ``y = matrix @ x + offset``.

    ``x`` and ``y`` are value vectors in the families' target order.
    """

    source: str
    target: str
    matrix: tuple = ()
    offset: tuple = ()

    def __post_init__(self):
        M = tuple(tuple(float(v) for v in row) for row in self.matrix)
        object.__setattr__(self, "matrix", M)
        c = tuple(float(v) for v in self.offset) if self.offset else (0.0,) * len(M)
        object.__setattr__(self, "offset", c)
        if len(c) != len(M) or len({len(r) for r in M}) > 1:
            raise StructuralError(f"rule {self.source!r} -> {self.target!r} has a ragged matrix")

    @property
    def array(self):
        cols = len(self.matrix[0]) if self.matrix else 0
        return np.array(self.matrix, dtype=float).reshape(len(self.matrix), cols)

    def map_values(self, values):
        x = np.asarray(values, dtype=float)
        M = self.array
        if M.shape[0] == 0:
            return np.zeros(0)
        if M.shape[1] != len(x):
            raise StructuralError(f"rule {self.source!r} expects {M.shape[1]} values, got {len(x)}")
        return M @ x + np.asarray(self.offset)


def _snap(values, family):
    out = []
    for v, d in zip(values, family.domains):
        v = float(v)
        if isinstance(d, FiniteDomain):
            near = min(d.values, key=lambda u: abs(u - v))
            if abs(near - v) <= SNAP_TOL * max(1.0, abs(v)):
                v = near
        else:
            if v < d.lo and d.lo - v <= SNAP_TOL * max(1.0, abs(v)):
                v = d.lo
            if v > d.hi and v - d.hi <= SNAP_TOL * max(1.0, abs(v)):
                v = d.hi
        out.append(v + 0.0)
    return out


@dataclass(frozen=True, eq=False)
class InterventionMap:
    """``omega: I_X -> I_Y`` as per-family affine rules plus explicit pairs.

    Explicit pairs take precedence; every other intervention is mapped by the
    rule of the first X-family containing it.
    """

    rules: tuple = ()
    pairs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "pairs", tuple((Intervention(a.targets), Intervention(b.targets))
                                                for a, b in self.pairs))
        labels = [r.source for r in self.rules]
        if len(set(labels)) != len(labels):
            raise StructuralError("more than one omega rule for the same X-family")
        keys = [a for a, _ in self.pairs]
        if len(set(keys)) != len(keys):
            raise StructuralError("omega lists the same X-intervention twice")

    @classmethod
    def identity(cls, catalog: InterventionCatalog):
        return cls(tuple(OmegaRule(f.label, f.label, np.eye(len(f.targets)).tolist())
                         for f in catalog))

    @property
    def pair_map(self):
        return dict(self.pairs)

    def rule_for(self, label):
        return next((r for r in self.rules if r.source == label), None)

    def apply(self, i: Intervention, x_catalog: InterventionCatalog, y_catalog: InterventionCatalog):
        explicit = self.pair_map.get(i)
        if explicit is not None:
            if not y_catalog.contains(explicit):
                raise StructuralError(f"omega({i}) = {explicit} is not in the Y catalog")
            return explicit
        fam = x_catalog.family_of(i)
        if fam is None:
            raise StructuralError(f"{i} is not in the X catalog")
        rule = self.rule_for(fam.label)
        if rule is None:
            raise StructuralError(f"omega has no rule or pair for {i} (family {fam.label!r})")
        try:
            yfam = y_catalog.by_label(rule.target)
        except KeyError:
            raise StructuralError(f"omega rule targets unknown Y-family {rule.target!r}") from None
        y = rule.map_values(fam.values_of(i))
        if len(y) != len(yfam.targets):
            raise StructuralError(f"rule {rule.source!r} yields {len(y)} values for Y-family "
                                  f"{yfam.label!r} with {len(yfam.targets)} targets")
        j = yfam.make(_snap(y, yfam))
        if not yfam.contains(j):
            raise StructuralError(f"omega({i}) = {j} lies outside Y-family {yfam.label!r}")
        return j


@dataclass(frozen=True)
class SurjectivityVerdict:
    passed: bool
    mode: str
    uncovered: str = None
    detail: str = ""

    def to_dict(self):
        return {"passed": self.passed, "mode": self.mode, "uncovered": self.uncovered,
                "detail": self.detail}


@dataclass(frozen=True)
class OrderVerdict:
    passed: bool
    pairs_checked: int
    counterexample: tuple = None
    mode: str = "exhaustive"

    def to_dict(self):
        ce = None
        if self.counterexample is not None:
            i, j, wi, wj = self.counterexample
            ce = {"i": str(i), "j": str(j), "omega_i": str(wi), "omega_j": str(wj)}
        return {"passed": self.passed, "pairs_checked": self.pairs_checked, "mode": self.mode,
                "counterexample": ce}


def _validate_omega(omega, x_catalog, y_catalog):
    explicit = omega.pair_map
    for f in x_catalog:
        if omega.rule_for(f.label) is not None:
            continue
        if f.enumerable and all(i in explicit for i in f.enumerate()):
            continue
        raise StructuralError(f"X-family {f.label!r} has no omega rule")
    for r in omega.rules:
        try:
            x_catalog.by_label(r.source)
        except KeyError:
            raise StructuralError(f"omega rule for unknown X-family {r.source!r}") from None
        try:
            y_catalog.by_label(r.target)
        except KeyError:
            raise StructuralError(f"omega rule targets unknown Y-family {r.target!r}") from None


def _image_bounds(M, c, xf):
    """Per-coordinate range of ``M x + c`` over the box of ``xf`` (interval arithmetic)."""
    lo = np.array(c, dtype=float)
    hi = np.array(c, dtype=float)
    for k, d in enumerate(xf.domains):
        a, b = (min(d.values), max(d.values)) if isinstance(d, FiniteDomain) else (d.lo, d.hi)
        for r in range(M.shape[0]):
            m = M[r, k]
            if m == 0.0:
                continue
            ends = (m * a, m * b)
            lo[r] += min(ends)
            hi[r] += max(ends)
    return lo, hi


def _bounds(xf):
    return [(None if np.isinf(d.lo) else d.lo, None if np.isinf(d.hi) else d.hi) for d in xf.domains]


def _feasible(M, c, xf, y):
    """Is there ``x`` in the (interval) box of ``xf`` with ``M x + c = y``?"""
    if M.shape[1] == 0:
        return bool(np.allclose(c, y, atol=SNAP_TOL, rtol=0))
    res = linprog(np.zeros(M.shape[1]), A_eq=M, b_eq=np.asarray(y) - c, bounds=_bounds(xf),
                  method="highs")
    return res.status == 0


def _affine_onto(rule, xf, yf):
    """Exactly decide whether ``rule`` maps the X-box onto the Y-box; ``(ok, detail)``."""
    if not all(isinstance(d, Interval) for d in xf.domains):
        return False, "finite X-domain cannot cover a continuous Y-family"
    if not all(isinstance(d, Interval) for d in yf.domains):
        return False, "non-enumerable finite Y-family"
    M, c = rule.array, np.asarray(rule.offset)
    ylo = np.array([d.lo for d in yf.domains])
    yhi = np.array([d.hi for d in yf.domains])
    lo, hi = _image_bounds(M, c, xf)
    if np.any(lo < ylo - SNAP_TOL) or np.any(hi > yhi + SNAP_TOL):
        raise StructuralError(f"rule {rule.source!r} -> {rule.target!r} maps outside the Y-domain")
    supports = [set(np.flatnonzero(M[r])) for r in range(M.shape[0])]
    if all(not (a & b) for a, b in itertools.combinations(supports, 2)):
        ok = bool(np.all(lo <= ylo + SNAP_TOL) and np.all(hi >= yhi - SNAP_TOL))
        return ok, "per-coordinate range" + ("" if ok else " falls short of the Y-domain")
    if all(d.lo == -np.inf and d.hi == np.inf for d in xf.domains):
        ok = np.linalg.matrix_rank(M) == M.shape[0]
        return bool(ok), "full row rank on an unbounded box" if ok else "rank deficient"
    if np.all(np.isfinite(ylo)) and np.all(np.isfinite(yhi)) and len(ylo) <= MAX_VERTEX_DIM:
        for corner in itertools.product(*zip(ylo, yhi)):
            if not _feasible(M, c, xf, corner):
                return False, f"Y-vertex {list(corner)} has no preimage"
        return True, "every Y-vertex has a preimage"
    return False, "onto-ness not decidable for this rule"


def check_omega(omega: InterventionMap, x_catalog, y_catalog, probes, pairs=None):
    """Surjectivity and order-preservation verdicts for ``omega``.

    ``probes`` is a :class:`~exactsem.interventions.ProbeSet` (or a list of
    interventions, then ``pairs`` must be given).
    """
    v, _ = _check_omega(omega, x_catalog, y_catalog, probes, pairs)
    return v


def _check_omega(omega, x_catalog, y_catalog, probes, pairs=None):
    _validate_omega(omega, x_catalog, y_catalog)
    if pairs is None:
        plist, pairs, exhaustive = probes.probes, probes.pairs, probes.exhaustive
    else:
        plist, exhaustive = tuple(probes), False
    images = {i: omega.apply(i, x_catalog, y_catalog) for i in plist}

    # order preservation on every comparable probe pair
    counter = None
    for i, j in pairs:
        if not leq(images[i], images[j]):
            counter = (i, j, images[i], images[j])
            break
    order = OrderVerdict(counter is None, len(pairs), counter,
                         "exhaustive" if exhaustive else "probe-based")

    # surjectivity
    exact_images = set(omega.pair_map.values())
    for f in x_catalog:
        if f.enumerable:
            exact_images.update(omega.apply(i, x_catalog, y_catalog) for i in f.enumerate())
    modes, surj = set(), None
    for yf in y_catalog:
        rules = [r for r in omega.rules if r.target == yf.label]
        if yf.enumerable:
            modes.add("exhaustive")
            missing = [j for j in yf.enumerate() if j not in exact_images]
            for r in rules:
                xf = x_catalog.by_label(r.source)
                if xf.enumerable or not missing:
                    continue
                if all(isinstance(d, Interval) for d in xf.domains):
                    missing = [j for j in missing
                               if not _feasible(r.array, np.asarray(r.offset), xf, yf.values_of(j))]
                else:
                    modes.add("probe-based")
                    seen = {images[i] for i in plist if x_catalog.family_of(i) is xf}
                    missing = [j for j in missing if j not in seen]
            if missing:
                surj = SurjectivityVerdict(False, "exhaustive", yf.label,
                                           f"{missing[0]} is not the image of any X-intervention")
                break
            continue
        modes.add("affine-onto")
        reasons = []
        for r in rules:
            ok, why = _affine_onto(r, x_catalog.by_label(r.source), yf)
            if ok:
                break
            reasons.append(f"{r.source}: {why}")
        else:
            surj = SurjectivityVerdict(False, "affine-onto", yf.label,
                                       "; ".join(reasons) or "no omega rule targets this family")
            break
    if surj is None:
        mode = "exhaustive" if modes <= {"exhaustive"} else (
            "probe-based" if "probe-based" in modes else "affine-onto")
        surj = SurjectivityVerdict(True, mode)
    return (surj, order), images


# --------------------------------------------------------------------------
# exactness


@dataclass(frozen=True)
class CheckConfig:
    """Knobs of :func:`check_exact`; ``seed`` drives probes, samples and permutations."""

    grid: int = 3
    random: int = 5
    samples: int = 50_000
    alpha: float = 0.01
    tol: float = 1e-9
    permutations: int = 200
    seed: int = 0
    force_monte_carlo: bool = False
    directions: int = None
    workers: int = 1

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("workers")
        return d


@dataclass(frozen=True)
class ProbeResult:
    intervention: Intervention
    family: str
    image: Intervention
    verdict: object

    def to_dict(self):
        return {"intervention": str(self.intervention), "family": self.family,
                "image": str(self.image), "verdict": self.verdict.to_dict()}


@dataclass(frozen=True)
class ExactnessReport:
    probes: tuple
    surjectivity: SurjectivityVerdict
    order: OrderVerdict
    omega_null: Intervention
    certification: str
    config: CheckConfig
    collapsed: tuple = ()

    @property
    def equalities_pass(self):
        return all(p.verdict.equal for p in self.probes)

    @property
    def exact(self):
        return self.surjectivity.passed and self.order.passed and self.equalities_pass

    @property
    def failures(self):
        return tuple(p for p in self.probes if not p.verdict.equal)

    def to_dict(self):
        return {
            "exact": self.exact,
            "certification": self.certification,
            "equalities_pass": self.equalities_pass,
            "omega_null": str(self.omega_null),
            "surjectivity": self.surjectivity.to_dict(),
            "order_preservation": self.order.to_dict(),
            "probes": [p.to_dict() for p in self.probes],
            "collapsed": [[str(i) for i in group] for group in self.collapsed],
            "config": self.config.to_dict(),
        }

    def summary(self):
        lines = [f"exact: {'yes' if self.exact else 'no'} ({self.certification})",
                 f"omega(null) = {self.omega_null}",
                 f"surjective: {self.surjectivity.passed} [{self.surjectivity.mode}]"
                 + (f" uncovered {self.surjectivity.uncovered}: {self.surjectivity.detail}"
                    if not self.surjectivity.passed else ""),
                 f"order-preserving: {self.order.passed} ({self.order.pairs_checked} pairs)"]
        if self.order.counterexample:
            i, j, wi, wj = self.order.counterexample
            lines.append(f"  counterexample: {i} <= {j} but {wi} !<= {wj}")
        for p in self.probes:
            v = p.verdict
            lines.append(f"  {'ok  ' if v.equal else 'FAIL'} {p.intervention} -> {p.image}: "
                         f"{v.method} statistic {v.statistic:.3g} vs {v.threshold:g}")
        return "\n".join(lines)


def _probe_key(i):
    """Stable integer key of an intervention, so a comparison at ``i`` always reuses its seeds."""
    return zlib.crc32(repr(sorted((n, v.hex()) for n, v in i.targets.items())).encode())


def _exact_law(model, i, tau=None):
    """Closed-form Gaussian or finite-support law of ``model`` at ``i`` (pushed through ``tau``), else None."""
    for kind in ("gaussian_law", "finite_law"):
        method = getattr(model, kind, None)
        if method is None:
            continue
        try:
            law = method(i)
            return pushforward(law, tau) if tau is not None else law
        except NotApplicableError:
            pass
    return None


def _laws_at(m_x, m_y, tau, i, j, cfg):
    seeds = [int(s) for s in np.random.SeedSequence([cfg.seed, _probe_key(i)]).generate_state(3)]
    if not cfg.force_monte_carlo:
        left, right = _exact_law(m_x, i, tau), _exact_law(m_y, j)
        if left is not None and right is not None:
            return left, right, seeds[2]
    left = EmpiricalLaw(tau.apply(m_x.sample(i, cfg.samples, seeds[0])), tau.target, seeds[0], i)
    right = EmpiricalLaw(m_y.sample(j, cfg.samples, seeds[1]), m_y.variables, seeds[1], j)
    return left, right, seeds[2]


def _compare_at(m_x, m_y, tau, i, j, cfg):
    try:
        a, b, seed = _laws_at(m_x, m_y, tau, i, j, cfg)
        return compare_laws(a, b, cfg.tol, cfg.alpha, cfg.permutations, seed, cfg.directions)
    except ExactSemError as err:
        err.intervention = i
        raise


def _check_arity(m_x, m_y, tau):
    if tau.source != tuple(m_x.variables):
        raise StructuralError(f"tau reads {tau.source} but the source model has {tuple(m_x.variables)}")
    if tau.target != tuple(m_y.variables):
        raise StructuralError(f"tau yields {tau.target} but the target model has {tuple(m_y.variables)}")


def check_exact(m_x, m_y, tau: Transformation, omega: InterventionMap, config: CheckConfig = None):
    """Decide whether ``m_y`` is an exact ``tau``-transformation of ``m_x`` witnessed by ``omega``.

    Every probe ``i`` of the source catalog is checked for
    ``law(tau(X) | do(i)) == law(Y | do(omega(i)))``, in closed form when both
    sides are linear-Gaussian and by an energy permutation test otherwise.
    ``m_x`` may be any object offering ``variables``, ``catalog``,
    ``sample(i, n, seed)`` and ``gaussian_law(i)`` (``finite_law(i)`` is optional).
    """
    cfg = config or CheckConfig()
    _check_arity(m_x, m_y, tau)
    probes = probe_catalog(m_x.catalog, cfg.grid, cfg.random, cfg.seed)
    (surj, order), images = _check_omega(omega, m_x.catalog, m_y.catalog, probes)

    def run(k):
        i = probes.probes[k]
        return ProbeResult(i, probes.labels[k], images[i],
                           _compare_at(m_x, m_y, tau, i, images[i], cfg))

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = tuple(pool.map(run, range(len(probes.probes))))
    else:
        results = tuple(run(k) for k in range(len(probes.probes)))

    groups = {}
    for i in probes.probes:
        groups.setdefault(images[i], []).append(i)
    collapsed = tuple(tuple(g) for g in groups.values() if len(g) > 1)
    null_image = omega.apply(Intervention(), m_x.catalog, m_y.catalog)
    return ExactnessReport(results, surj, order, null_image,
                           "exhaustive" if probes.exhaustive else "probe-certified", cfg, collapsed)


@dataclass(frozen=True)
class DiagramVerdict:
    """Edges of the causal-consistency square for a pair ``i <= j``."""

    i: Intervention
    j: Intervention
    omega_i: Intervention
    omega_j: Intervention
    image_ordered: bool
    left: object
    right: object

    @property
    def commutes(self):
        return self.image_ordered and self.left.equal and self.right.equal

    def to_dict(self):
        return {"i": str(self.i), "j": str(self.j), "omega_i": str(self.omega_i),
                "omega_j": str(self.omega_j), "image_ordered": self.image_ordered,
                "left": self.left.to_dict(), "right": self.right.to_dict(),
                "commutes": self.commutes}


def check_diagram(m_x, m_y, tau, omega, pair, config: CheckConfig = None) -> DiagramVerdict:
    """Check that ``i <= j`` is carried to ``omega(i) <= omega(j)`` with both law squares equal."""
    cfg = config or CheckConfig()
    i, j = pair
    if not leq(i, j):
        raise PreconditionError(f"{i} <= {j} does not hold")
    _check_arity(m_x, m_y, tau)
    wi = omega.apply(i, m_x.catalog, m_y.catalog)
    wj = omega.apply(j, m_x.catalog, m_y.catalog)
    left = _compare_at(m_x, m_y, tau, i, wi, cfg)
    right = left if i == j else _compare_at(m_x, m_y, tau, j, wj, cfg)
    return DiagramVerdict(i, j, wi, wj, leq(wi, wj), left, right)


# --------------------------------------------------------------------------
# composition and relabelling


def compose_maps(first: InterventionMap, second: InterventionMap, x_catalog=None, y_catalog=None,
                 z_catalog=None) -> InterventionMap:
    """``second o first``, rule by rule; explicit pairs are pushed through ``second``."""
    rules, pairs = [], []
    have_catalogs = x_catalog is not None and y_catalog is not None and z_catalog is not None
    for r1 in first.rules:
        r2 = second.rule_for(r1.target)
        if r2 is not None:
            A1, A2 = r1.array, r2.array
            M = A2 @ A1 if A2.shape[0] else np.zeros((0, A1.shape[1]))
            c = A2 @ np.asarray(r1.offset) + np.asarray(r2.offset) if A2.shape[0] else np.zeros(0)
            rules.append(OmegaRule(r1.source, r2.target, M.tolist(), c.tolist()))
            continue
        if not have_catalogs:
            raise PreconditionError(f"composing rule {r1.source!r} needs the three catalogs")
        xf = x_catalog.by_label(r1.source)
        if not xf.enumerable:
            raise PreconditionError(f"cannot compose rule {r1.source!r}: no rule for "
                                    f"{r1.target!r} and the family is not enumerable")
        for i in xf.enumerate():
            pairs.append((i, second.apply(first.apply(i, x_catalog, y_catalog), y_catalog, z_catalog)))
    for i, j in first.pairs:
        explicit = second.pair_map.get(j)
        if explicit is None:
            if not have_catalogs:
                raise PreconditionError("composing explicit pairs needs the three catalogs")
            explicit = second.apply(j, y_catalog, z_catalog)
        pairs.append((i, explicit))
    dedup = dict(pairs)
    return InterventionMap(tuple(rules), tuple(dedup.items()))


def compose_transformations(t1, t2, x_catalog=None, y_catalog=None, z_catalog=None):
    """Compose ``(tau_YX, omega_YX)`` with ``(tau_ZY, omega_ZY)`` into ``(tau_ZX, omega_ZX)``.

    ``t1``/``t2`` are ``(tau, omega)`` pairs or objects with ``tau``/``omega``
    attributes.  Catalogs are needed only when a step is given by explicit pairs.
    """
    tau1, om1 = (t1.tau, t1.omega) if hasattr(t1, "tau") else t1
    tau2, om2 = (t2.tau, t2.omega) if hasattr(t2, "tau") else t2
    if tau1.target != tau2.source:
        raise PreconditionError(f"arity mismatch: first yields {tau1.target}, second reads {tau2.source}")
    return tau1.then(tau2), compose_maps(om1, om2, x_catalog, y_catalog, z_catalog)


def permutation_transformation(sem, pi):
    """Relabel the variables of ``sem`` by the bijection ``pi`` (old name -> new name).

    Returns ``(m_y, tau, omega)`` where ``tau`` moves each coordinate to its new name.
    """
    pi = dict(pi)
    names = set(sem.variables)
    full = {v: pi.get(v, v) for v in sem.variables}
    if set(pi) - names or set(full.values()) != names:
        raise PreconditionError("pi is not a bijection on the model's variables")
    eqs = {full[v]: rename(e, full) for v, e in sem.equations.items()}
    fams = [InterventionFamily(f.label, tuple(full[t] for t in f.targets), f.domains)
            for f in sem.catalog]
    domains = {full[v]: d for v, d in sem.domains.items()}
    m_y = dataclasses.replace(sem, equations={v: eqs[v] for v in sem.variables},
                              catalog=InterventionCatalog(fams), domains=domains)
    inverse = {w: v for v, w in full.items()}
    idx = sem.index
    tau = Transformation("projection", sem.variables, sem.variables,
                         indices=tuple(idx[inverse[w]] for w in sem.variables))
    return m_y, tau, InterventionMap.identity(sem.catalog)
