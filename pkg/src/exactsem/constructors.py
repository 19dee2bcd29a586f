"""Constructors of exact transformations and the linear dynamics simulator.

Each constructor returns a :class:`CertifiedTriple` ``(M_Y, tau, omega)``
that has already passed :func:`~exactsem.transform.check_exact`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import GaussianLaw
from .errors import CertificationError, PreconditionError, SolverError, StructuralError
from .expr import (Const, Exo, Var, add, exogenous_in, linear_expr, mul, split_linear, substitute,
                   variables_in)
from .interventions import (FiniteDomain, Intervention, InterventionCatalog, InterventionFamily,
                            Interval, MAX_ENUMERATION)
from .noise import NoiseModel
from .sem import Sem, SolverConfig
from .transform import CheckConfig, InterventionMap, OmegaRule, Transformation, check_exact

#: Column sums may differ by this much (relative to ``max(1, |a|)``).
COLUMN_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CertifiedTriple:
    """Target model, ``tau`` and ``omega`` plus where they came from and the certifying report."""

    model: Sem
    tau: Transformation
    omega: InterventionMap
    provenance: dict = field(default_factory=dict)
    report: object = None


def _certify(m_x, m_y, tau, omega, provenance, certify, config):
    report = None
    if certify:
        report = check_exact(m_x, m_y, tau, omega, config or CheckConfig())
        if not report.exact:
            raise CertificationError(f"{provenance.get('construction')} output failed its "
                                     f"exactness check", report)
    return CertifiedTriple(m_y, tau, omega, provenance, report)


def _selection(keep_positions, width):
    M = np.zeros((len(keep_positions), width))
    M[np.arange(len(keep_positions)), keep_positions] = 1.0
    return M.tolist()


# --------------------------------------------------------------------------
# marginalisation


def marginalize_childless(sem: Sem, z, certify=True, config=None) -> CertifiedTriple:
    """Drop the variables ``z``, none of which is read by a variable outside ``z``.

    Interventions lose their ``z``-targets; families collapsing onto the same
    target set and domains are merged under the first label.
    """
    z = set(z)
    unknown = z - set(sem.variables)
    if unknown:
        raise PreconditionError(f"cannot drop undeclared variables {sorted(unknown)}")
    for v in sem.variables:
        if v in z:
            continue
        read = [p for p in variables_in(sem.equations[v]) if p in z]
        if read:
            raise PreconditionError(f"{read[0]} is not childless: {v} depends on it")
    keep = tuple(v for v in sem.variables if v not in z)
    if not keep:
        raise PreconditionError("cannot drop every variable")
    eqs = {v: sem.equations[v] for v in keep}
    exo_used = {e for v in keep for e in exogenous_in(eqs[v])}
    noise = sem.noise.restrict(exo_used)

    families, rules, by_key = [], [], {}
    for f in sem.catalog:
        pos = [k for k, t in enumerate(f.targets) if t not in z]
        reduced = InterventionFamily(f.label, tuple(f.targets[k] for k in pos),
                                     tuple(f.domains[k] for k in pos))
        label = by_key.get(reduced.key)
        if label is None:
            label = by_key[reduced.key] = f.label
            families.append(reduced)
        rules.append(OmegaRule(f.label, label, _selection(pos, len(f.targets))))
    m_y = Sem(keep, eqs, noise, InterventionCatalog(families),
              {v: sem.domains[v] for v in keep}, sem.solver)
    tau = Transformation.projection(sem.variables, keep)
    omega = InterventionMap(tuple(rules))
    return _certify(sem, m_y, tau, omega, {"construction": "marginalize_childless",
                                           "dropped": sorted(z)}, certify, config)


def marginalize_nonintervened(sem: Sem, z, certify=True, config=None) -> CertifiedTriple:
    """Substitute the never-intervened variables ``z`` into their children (acyclic models).

    Children keep reading the absorbed exogenous ids, so noise shared through
    a marginalised common parent stays dependent.
    """
    z = set(z)
    unknown = z - set(sem.variables)
    if unknown:
        raise PreconditionError(f"cannot drop undeclared variables {sorted(unknown)}")
    if not sem.structure.acyclic:
        raise PreconditionError("marginalising non-intervened variables needs an acyclic model")
    targeted = z & sem.catalog.targets_used
    if targeted:
        raise PreconditionError(f"{sorted(targeted)[0]} is intervened upon by the catalog")
    keep = tuple(v for v in sem.variables if v not in z)
    if not keep:
        raise PreconditionError("cannot drop every variable")
    eqs = dict(sem.equations)
    for v in reversed(sem.structure.order):
        if v not in z:
            continue
        body = eqs.pop(v)
        eqs = {w: substitute(e, {v: body}) for w, e in eqs.items()}
    eqs = {v: eqs[v] for v in keep}
    exo_used = {e for v in keep for e in exogenous_in(eqs[v])}
    m_y = Sem(keep, eqs, sem.noise.restrict(exo_used), sem.catalog,
              {v: sem.domains[v] for v in keep}, sem.solver)
    tau = Transformation.projection(sem.variables, keep)
    omega = InterventionMap.identity(sem.catalog)
    return _certify(sem, m_y, tau, omega, {"construction": "marginalize_nonintervened",
                                           "dropped": sorted(z)}, certify, config)


# --------------------------------------------------------------------------
# micro -> macro


def _mean_domain(domains, label):
    if all(isinstance(d, Interval) for d in domains):
        k = len(domains)
        return Interval(sum(d.lo for d in domains) / k, sum(d.hi for d in domains) / k)
    if all(isinstance(d, FiniteDomain) for d in domains):
        if math.prod(d.size for d in domains) > MAX_ENUMERATION:
            raise PreconditionError(f"family {label!r} is too large to average exactly")
        k = len(domains)
        return FiniteDomain(tuple(math.fsum(c) / k
                                  for c in itertools.product(*(d.values for d in domains))))
    raise PreconditionError(f"family {label!r} mixes finite and interval domains")


def aggregate_micro_macro(sem: Sem, w=None, z=None, names=("What", "Zhat"), certify=True,
                          config=None) -> CertifiedTriple:
    """Average the micro layers ``W`` (pure noise) and ``Z = A W + F`` into ``(What, Zhat)``.

    Requires every column of ``A`` to sum to the same ``a``.  The macro model is
    ``What = Ehat``, ``Zhat = (a n / m) What + Fhat`` with ``Ehat``/``Fhat`` the
    averaged exogenous terms, which read the original base noises.
    """
    if w is None:
        w = tuple(v for v in sem.variables if not variables_in(sem.equations[v]))
    if z is None:
        z = tuple(v for v in sem.variables if v not in set(w))
    w, z = tuple(w), tuple(z)
    if not w or not z or set(w) & set(z) or set(w) | set(z) != set(sem.variables):
        raise StructuralError("model must split into non-empty W and Z layers")
    n, m = len(w), len(z)
    for v in w:
        if variables_in(sem.equations[v]):
            raise StructuralError(f"W-variable {v} must depend on noise only")
    A = np.zeros((m, n))
    remainders = []
    for r, v in enumerate(z):
        split = split_linear(sem.equations[v], w)
        if split is None or variables_in(split[1]):
            raise StructuralError(f"Z-variable {v} must be affine in W plus noise")
        coefs, rest = split
        for c, wv in enumerate(w):
            A[r, c] = coefs.get(wv, 0.0)
        remainders.append(rest)
    sums = A.sum(axis=0)
    a = float(sums.mean())
    spread = float(sums.max() - sums.min())
    if spread > COLUMN_SUM_TOL * max(1.0, abs(a)):
        raise PreconditionError(f"column sums of A differ (max spread {spread:.3g})")

    w_hat, z_hat = names
    exo_hat, fam_hat = f"{w_hat}_noise", f"{z_hat}_noise"
    exo_map = sem.noise.exogenous
    ehat = mul(Const(1.0 / n), add(*(substitute(sem.equations[v], exo_map=exo_map) for v in w)))
    fhat = mul(Const(1.0 / m), add(*(substitute(r, exo_map=exo_map) for r in remainders)))
    noise = NoiseModel(sem.noise.base, {exo_hat: ehat, fam_hat: fhat})
    eqs = {w_hat: Exo(exo_hat),
           z_hat: linear_expr([(a * n / m, Var(w_hat)), (1.0, Exo(fam_hat))])}

    families, rules = [], []
    avg_w = [1.0 / n] * n
    avg_z = [1.0 / m] * m
    for f in sem.catalog:
        t = set(f.targets)
        if not t:
            families.append(f)
            rules.append(OmegaRule(f.label, f.label, ()))
            continue
        dom = dict(zip(f.targets, f.domains))
        pos = {v: k for k, v in enumerate(f.targets)}
        rows, targets, domains = [], [], []
        for layer, name, weights in ((w, w_hat, avg_w), (z, z_hat, avg_z)):
            hit = t & set(layer)
            if not hit:
                continue
            if hit != set(layer):
                raise StructuralError(f"family {f.label!r} intervenes on part of a layer")
            row = [0.0] * len(f.targets)
            for v, wt in zip(layer, weights):
                row[pos[v]] = wt
            rows.append(row)
            targets.append(name)
            domains.append(_mean_domain([dom[v] for v in layer], f.label))
        families.append(InterventionFamily(f.label, tuple(targets), tuple(domains)))
        rules.append(OmegaRule(f.label, f.label, rows))
    m_y = Sem((w_hat, z_hat), eqs, noise, InterventionCatalog(families), None, sem.solver)
    T = np.zeros((2, n + m))
    idx = sem.index
    for v in w:
        T[0, idx[v]] = 1.0 / n
    for v in z:
        T[1, idx[v]] = 1.0 / m
    tau = Transformation.affine(sem.variables, (w_hat, z_hat), T)
    omega = InterventionMap(tuple(rules))
    return _certify(sem, m_y, tau, omega, {"construction": "aggregate_micro_macro", "w": list(w),
                                           "z": list(z), "a": a}, certify, config)


# --------------------------------------------------------------------------
# dynamics


@dataclass(frozen=True, eq=False)
class DynamicalSpec:
    """Linear process ``x_{t+1} = A x_t + E`` with the same noise draw at every step.

    ``exogenous`` names the noise outputs (one per coordinate, in order) inside
    ``noise``; ``catalog`` holds clamp families over ``variables``.  Simulations
    run ``horizon`` steps and must settle to within ``tol``.
    """

    A: np.ndarray
    noise: NoiseModel
    catalog: InterventionCatalog = None
    variables: tuple = None
    exogenous: tuple = None
    horizon: int = 200
    tol: float = 1e-6

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise PreconditionError(f"transition matrix must be square, got {A.shape}")
        p = A.shape[0]
        object.__setattr__(self, "A", A)
        variables = tuple(self.variables or (f"X{k + 1}" for k in range(p)))
        exogenous = tuple(self.exogenous or self.noise.exo_names)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "exogenous", exogenous)
        if len(variables) != p or len(exogenous) != p:
            raise PreconditionError(f"need {p} variable names and {p} noise outputs")
        missing = [e for e in exogenous if e not in self.noise.exogenous]
        if missing:
            raise PreconditionError(f"noise model lacks outputs {missing}")
        catalog = self.catalog or InterventionCatalog([InterventionFamily("null", (), ())])
        object.__setattr__(self, "catalog", catalog)
        if catalog.null_family is None:
            raise PreconditionError("catalog lacks the null intervention")
        bad = catalog.targets_used - set(variables)
        if bad:
            raise PreconditionError(f"clamp sets name unknown coordinates {sorted(bad)}")

    @property
    def norm(self):
        return float(np.linalg.norm(self.A, 2))

    def _clamps(self, i):
        idx = {v: k for k, v in enumerate(self.variables)}
        t = i.targets
        unknown = set(t) - set(idx)
        if unknown:
            raise PreconditionError(f"clamp on unknown coordinates {sorted(unknown)}")
        return [idx[v] for v in t], np.array(list(t.values()), dtype=float)

    def noise_matrix(self, n, seed):
        draws = self.noise.sample(n, np.random.default_rng(seed))
        return np.column_stack([draws[e] for e in self.exogenous])

    def sample(self, i, n, seed):
        """Simulated limits for ``n`` noise draws (rows), from ``x_0 = 0``."""
        E = self.noise_matrix(n, seed)
        cols, vals = self._clamps(i)
        X = np.zeros_like(E)
        X[:, cols] = vals
        prev = X
        for _ in range(self.horizon):
            prev = X
            X = X @ self.A.T + E
            X[:, cols] = vals
        residual = np.abs(X - prev).max(axis=1) if self.horizon else np.zeros(n)
        if residual.size and residual.max() > self.tol:
            row = int(np.argmax(residual))
            raise SolverError(f"dynamics under {i} not settled after {self.horizon} steps "
                              f"(residual {residual[row]:.3e} at draw {row})", float(residual[row]), row)
        return X

    def gaussian_law(self, i):
        """Exact law of the limit ``x* = A_do x* + e_do`` for Gaussian or point-mass noise."""
        mean_e, cov_e = self.noise.gaussian_moments(self.exogenous)
        cols, vals = self._clamps(i)
        p = len(self.variables)
        A = self.A.copy()
        A[cols, :] = 0.0
        L = np.eye(p)
        L[cols, :] = 0.0
        M = np.eye(p) - A
        c = L @ mean_e
        c[cols] = vals
        B = np.linalg.solve(M, L)
        mu = np.linalg.solve(M, c)
        cov = B @ cov_e @ B.T
        mu[cols] = vals
        cov[cols, :] = 0.0
        cov[:, cols] = 0.0
        return GaussianLaw(mu, cov, self.variables)


@dataclass(frozen=True)
class DynamicsResult:
    trajectory: np.ndarray
    limit: np.ndarray
    residual: float


def _check_contraction(spec):
    norm = spec.norm
    if not norm < 1.0:
        raise PreconditionError(f"||A||_2 = {norm:.6g} is not below 1; no contraction certificate")
    diag = np.diag(spec.A)
    if np.any(diag == 1.0):
        raise PreconditionError("A has a unit diagonal entry")
    return norm


def simulate_dynamics(spec: DynamicalSpec, i: Intervention, e, x0=None, T=None) -> DynamicsResult:
    """Iterate ``x_{t+1} = g(A x_t + e)`` where ``g`` overwrites clamped coordinates.

    ``e`` is one noise vector (coordinate order).  The limit estimate is ``x_T``
    with residual ``max |x_T - x_{T-1}|``; a residual above ``spec.tol`` raises
    :class:`SolverError`.
    """
    _check_contraction(spec)
    T = spec.horizon if T is None else int(T)
    e = np.asarray(e, dtype=float).reshape(-1)
    p = len(spec.variables)
    if e.shape != (p,):
        raise PreconditionError(f"noise vector must have {p} entries")
    cols, vals = spec._clamps(i or Intervention())
    x = np.zeros(p) if x0 is None else np.array(x0, dtype=float)
    x[cols] = vals
    traj = [x.copy()]
    for _ in range(T):
        x = spec.A @ x + e
        x[cols] = vals
        traj.append(x.copy())
    traj = np.array(traj)
    residual = float(np.abs(traj[-1] - traj[-2]).max()) if T else math.inf
    if residual > spec.tol:
        raise SolverError(f"dynamics under {i} not settled after {T} steps (residual {residual:.3e})",
                          residual)
    return DynamicsResult(traj, traj[-1].copy(), residual)


def equilibrate(spec: DynamicalSpec, names=None, certify=True, config=None) -> CertifiedTriple:
    """Equilibrium SEM ``Y^i = sum_{j != i} A_ij / (1 - A_ii) Y^j + F^i / (1 - A_ii)``.

    ``F`` has the law of ``E`` (the same noise model is reused).  ``tau``
    relabels the limit coordinates; the source side of certification is the
    simulated-limit sampler of ``spec``.
    """
    _check_contraction(spec)
    p = len(spec.variables)
    names = tuple(names or (f"Y{k + 1}" for k in range(p)))
    if len(names) != p:
        raise PreconditionError(f"need {p} target names")
    rename = dict(zip(spec.variables, names))
    A = spec.A
    eqs = {}
    for r, y in enumerate(names):
        s = 1.0 - A[r, r]
        terms = [(A[r, c] / s, Var(names[c])) for c in range(p) if c != r]
        terms.append((1.0 / s, Exo(spec.exogenous[r])))
        eqs[y] = linear_expr(terms)
    fams = [InterventionFamily(f.label, tuple(rename[t] for t in f.targets), f.domains)
            for f in spec.catalog]
    m_y = Sem(names, eqs, spec.noise, InterventionCatalog(fams), None, SolverConfig())
    tau = Transformation("projection", spec.variables, names, indices=tuple(range(p)))
    omega = InterventionMap.identity(spec.catalog)
    return _certify(spec, m_y, tau, omega, {"construction": "equilibrate", "norm": spec.norm},
                    certify, config)
