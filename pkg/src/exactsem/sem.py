"""Structural equation models: structure analysis, interventions, solving and sampling."""
from __future__ import annotations

import dataclasses
import functools
import graphlib
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import PreconditionError, SingularSystemError, SolverError, ValidationError
from .expr import (Const, Exo, Var, affine_form, evaluate, exogenous_in, linear_expr,
                   parse_expr, variables_in)
from .interventions import FiniteDomain, Intervention, InterventionCatalog, InterventionFamily
from .noise import NoiseModel

DOMAINS = ("real", "binary")

#: Condition number above which ``I - A_do`` is treated as singular.
SINGULAR_COND = 1e12


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 10_000
    damping: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise ValidationError(f"damping {self.damping} outside [0, 1)")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValidationError("solver tolerance and max_iter must be positive")


@dataclass(frozen=True, eq=False)
class LinearSemView:
    """Equations written as ``x = A x + b + G e``.

    ``loading`` (``G``) has one column per exogenous id in ``exogenous``;
    in the common one-noise-per-equation case it is the identity.
    """

    variables: tuple
    exogenous: tuple
    matrix: np.ndarray
    offset: np.ndarray
    loading: np.ndarray

    def expressions(self):
        """Rebuild affine equations from ``(A, b, G)``."""
        out = {}
        for r, v in enumerate(self.variables):
            terms = [(self.matrix[r, c], Var(w)) for c, w in enumerate(self.variables)]
            terms += [(self.loading[r, c], Exo(e)) for c, e in enumerate(self.exogenous)]
            out[v] = linear_expr(terms, self.offset[r])
        return out


@dataclass(frozen=True, eq=False)
class StructureReport:
    parents: dict
    edges: tuple
    acyclic: bool
    order: tuple
    linear: LinearSemView

    def children(self, name):
        return tuple(c for p, c in self.edges if p == name)


@dataclass(frozen=True)
class Sem:
    """An SEM ``(S_X, I_X, P_E)``.

    Parameters
    ----------
    variables : tuple of str
        Endogenous variables, in coordinate order.
    equations : mapping
        One expression per variable.
    noise : NoiseModel
    catalog : InterventionCatalog
        Must contain the null family.
    domains : mapping, optional
        ``"real"`` (default) or ``"binary"`` per variable.
    """

    variables: tuple
    equations: Mapping
    noise: NoiseModel
    catalog: InterventionCatalog = field(default_factory=lambda: InterventionCatalog(
        [InterventionFamily("null", (), ())]))
    domains: Mapping = None
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "equations", {v: self.equations[v] for v in self.variables}
                           if set(self.equations) == set(self.variables) else dict(self.equations))
        domains = {v: "real" for v in self.variables}
        domains.update(self.domains or {})
        object.__setattr__(self, "domains", domains)
        _validate(self)

    @functools.cached_property
    def structure(self) -> StructureReport:
        return analyze_structure(self)

    @property
    def index(self):
        return {v: k for k, v in enumerate(self.variables)}

    def intervene(self, i):
        return apply_intervention(self, i)

    def sample(self, i, n, seed):
        return sample(self, i, n, seed)

    def gaussian_law(self, i):
        from .distributions import closed_form_law
        return closed_form_law(self, i)

    def finite_law(self, i):
        from .distributions import finite_law
        return finite_law(self, i)


def _validate(sem):
    names = sem.variables
    if not names:
        raise ValidationError("model declares no variables", "variables")
    for v in names:
        if not isinstance(v, str) or not v:
            raise ValidationError(f"invalid variable name {v!r}", "variables")
    if len(set(names)) != len(names):
        raise ValidationError("duplicate variable names", "variables")
    missing = set(names) - set(sem.equations)
    extra = set(sem.equations) - set(names)
    if missing:
        raise ValidationError(f"no equation for {sorted(missing)}", "equations")
    if extra:
        raise ValidationError(f"equation for undeclared variable(s) {sorted(extra)}", "equations")
    clash = set(names) & (set(sem.noise.exogenous) | set(sem.noise.base))
    if clash:
        raise ValidationError(f"names used for both variables and noise: {sorted(clash)}")
    for v, e in sem.equations.items():
        for ref in variables_in(e):
            if ref not in sem.equations:
                raise ValidationError(f"undeclared variable {ref!r}", f"equations.{v}")
        for ref in exogenous_in(e):
            if ref not in sem.noise.exogenous:
                raise ValidationError(f"undeclared exogenous id {ref!r}", f"equations.{v}")
    for v, d in sem.domains.items():
        if v not in sem.equations:
            raise ValidationError(f"domain for undeclared variable {v!r}", "variables")
        if d not in DOMAINS:
            raise ValidationError(f"unknown domain {d!r} for {v}", "variables")
    if sem.catalog.null_family is None:
        raise ValidationError("intervention catalog lacks the null intervention", "interventions")
    for f in sem.catalog:
        for t, d in zip(f.targets, f.domains):
            if t not in sem.equations:
                raise ValidationError(f"family {f.label!r} targets undeclared variable {t!r}",
                                      "interventions")
            if sem.domains[t] == "binary" and not (
                    isinstance(d, FiniteDomain) and set(d.values) <= {0.0, 1.0}):
                raise ValidationError(f"family {f.label!r} sets binary {t} outside {{0, 1}}",
                                      "interventions")


def make_sem(equations: Mapping[str, str], base: Mapping = None, exogenous: Mapping[str, str] = None,
             interventions=None, families=None, domains=None, solver=None) -> Sem:
    """Build a :class:`Sem` from expression strings.

    ``interventions`` is a list of target mappings (one singleton family each);
    ``families`` a list of :class:`InterventionFamily`.  The null intervention
    is added when absent.
    """
    base = dict(base or {})
    exogenous = dict(exogenous or {})
    exo = {k: parse_expr(t, (), base, f"exogenous.map.{k}") for k, t in exogenous.items()}
    variables = tuple(equations)
    eqs = {v: parse_expr(t, variables, exogenous, f"equations.{v}") for v, t in equations.items()}
    fams = []
    if interventions is not None:
        fams.extend(InterventionCatalog.from_interventions(interventions))
    fams.extend(families or ())
    if not any(f.is_null for f in fams):
        fams.insert(0, InterventionFamily("null", (), ()))
    return Sem(variables, eqs, NoiseModel(base, exo), InterventionCatalog(fams), domains,
               solver or SolverConfig())


# --------------------------------------------------------------------------
# structure


def analyze_structure(sem: Sem) -> StructureReport:
    """Parent graph, acyclicity, topological order and (if affine) the linear view."""
    parents = {v: variables_in(sem.equations[v]) for v in sem.variables}
    edges = tuple((p, v) for v in sem.variables for p in parents[v])
    sorter = graphlib.TopologicalSorter({v: parents[v] for v in sem.variables})
    try:
        order = tuple(sorter.static_order())
        acyclic = True
    except graphlib.CycleError:
        order, acyclic = None, False
    return StructureReport(parents, edges, acyclic, order, _linear_view(sem))


def _linear_view(sem):
    exo_names = tuple(sem.noise.exogenous)
    vidx = sem.index
    eidx = {e: k for k, e in enumerate(exo_names)}
    p = len(sem.variables)
    A = np.zeros((p, p))
    b = np.zeros(p)
    G = np.zeros((p, len(exo_names)))
    for r, v in enumerate(sem.variables):
        form = affine_form(sem.equations[v])
        if form is None:
            return None
        coefs, c = form
        b[r] = c
        for node, coef in coefs.items():
            if isinstance(node, Var):
                A[r, vidx[node.name]] += coef
            else:
                G[r, eidx[node.name]] += coef
    return LinearSemView(sem.variables, exo_names, A, b, G)


# --------------------------------------------------------------------------
# interventions


def apply_intervention(sem: Sem, i: Intervention) -> Sem:
    """Replace each targeted equation by its constant; restrict the catalog to ``{j : i <= j}``."""
    if i.is_null:
        return sem
    eqs = dict(sem.equations)
    for name, value in i.targets.items():
        if name not in eqs:
            raise PreconditionError(f"intervention {i} targets undeclared variable {name!r}")
        if sem.domains[name] == "binary" and value not in (0.0, 1.0):
            raise PreconditionError(f"intervention {i} sets binary variable {name} to {value}")
        eqs[name] = Const(value)
    return dataclasses.replace(sem, equations=eqs, catalog=sem.catalog.above(i))


# --------------------------------------------------------------------------
# solving


def _exo_matrix(names, exo, n):
    if not names:
        return np.zeros((n, 0))
    return np.column_stack([np.broadcast_to(np.asarray(exo[e], dtype=float), (n,)) for e in names])


def _evaluate_all(sem, X, exo):
    env = dict(exo)
    env.update({v: X[:, k] for k, v in enumerate(sem.variables)})
    n = X.shape[0]
    return np.column_stack([np.broadcast_to(np.asarray(evaluate(sem.equations[v], env), dtype=float), (n,))
                            for v in sem.variables])


def _iterate(step, X, cfg, residual_of):
    """Pure (optionally damped) fixed-point iteration; returns ``X`` once ``|F(X) - X| < tol``."""
    theta = cfg.damping
    for _ in range(cfg.max_iter):
        FX = step(X)
        diff = np.abs(FX - X)
        if diff.size == 0 or diff.max() < cfg.tol:
            return X
        X = FX if theta == 0.0 else theta * X + (1 - theta) * FX
    diff = residual_of(X)
    row = int(np.argmax(diff.max(axis=1)))
    raise SolverError(f"fixed-point iteration did not converge in {cfg.max_iter} iterations "
                      f"(residual {diff.max():.3e} at draw {row})", residual=float(diff.max()),
                      draw_index=row)


def _solve_batch(sem: Sem, exo: Mapping, n: int, x0=None):
    """Solve the (already intervened) equations for ``n`` exogenous draws at once.

    Returns an ``n x p`` array.  Acyclic models are evaluated in topological
    order; cyclic linear models iterate when the free block contracts in the
    2-norm and fall back to a direct solve otherwise; cyclic nonlinear models
    iterate best-effort.
    """
    st = sem.structure
    p = len(sem.variables)
    if st.acyclic:
        env = dict(exo)
        cols = {}
        for v in st.order:
            val = np.broadcast_to(np.asarray(evaluate(sem.equations[v], env), dtype=float), (n,))
            env[v] = val
            cols[v] = val
        return np.column_stack([cols[v] for v in sem.variables]) if p else np.zeros((n, 0))

    X = np.zeros((n, p)) if x0 is None else np.array(np.broadcast_to(x0, (n, p)), dtype=float)
    view = st.linear
    if view is not None:
        A = view.matrix
        C = view.offset + _exo_matrix(view.exogenous, exo, n) @ view.loading.T
        free = [k for k, v in enumerate(sem.variables) if not isinstance(sem.equations[v], Const)]
        block = A[np.ix_(free, free)]
        if block.size and np.linalg.norm(block, 2) < 1.0:
            return _iterate(lambda Z: Z @ A.T + C, X, sem.solver,
                            lambda Z: np.abs(Z @ A.T + C - Z))
        M = np.eye(p) - A
        if np.linalg.cond(M) > SINGULAR_COND:
            raise SingularSystemError("intervened linear system I - A is singular; "
                                      "no unique solution")
        return np.linalg.solve(M, C.T).T

    step = lambda Z: _evaluate_all(sem, Z, exo)
    return _iterate(step, X, sem.solver, lambda Z: np.abs(step(Z) - Z))


def solve_given_noise(sem: Sem, i: Intervention, e: Mapping[str, float], x0=None) -> dict:
    """Unique solution of the ``i``-intervened equations for one exogenous assignment ``e``.

    ``x0`` is the starting point for cyclic fixed-point iteration (zeros by default).
    """
    missing = [k for k in sem.noise.exogenous if k not in e]
    if missing:
        raise PreconditionError(f"exogenous assignment lacks {missing}")
    sem_i = apply_intervention(sem, i)
    exo = {k: np.array([float(e[k])]) for k in sem.noise.exogenous}
    x = _solve_batch(sem_i, exo, 1, None if x0 is None else np.asarray(x0, dtype=float)[None, :])
    return {v: float(x[0, k]) for k, v in enumerate(sem.variables)}


def sample(sem: Sem, i: Intervention, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws (rows) from the ``i``-interventional distribution.

    Base noises are drawn from ``numpy.random.default_rng(seed)`` in declaration
    order, so equal ``(seed, n)`` give bit-identical noise for every ``i``.
    """
    if n < 1:
        raise PreconditionError("sample size must be positive")
    sem_i = apply_intervention(sem, i)
    rng = np.random.default_rng(seed)
    exo = sem_i.noise.sample(n, rng)
    try:
        return _solve_batch(sem_i, exo, n)
    except SolverError as err:
        raise SolverError(f"under {i}: {err}", err.residual, err.draw_index) from err
