"""Interventional laws, push-forwards through transformations, and equality decisions."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NotApplicableError, PreconditionError, SingularSystemError
from .expr import evaluate
from .interventions import Intervention
from .noise import Bernoulli, PointMass
from .sem import SINGULAR_COND, _solve_batch, apply_intervention

#: Round-off allowance for the PSD check on covariances.
PSD_TOL = 1e-12

#: Largest number of joint base-noise outcomes enumerated by :func:`finite_law`.
MAX_ATOMS = 4096

#: Atoms closer than this (sup-norm, relative to magnitude) are the same outcome.
ATOM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GaussianLaw:
    """Multivariate normal law, possibly degenerate (clamped coordinates have zero variance)."""

    mean: np.ndarray
    cov: np.ndarray
    labels: tuple

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float).reshape(len(mean), len(mean))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", (cov + cov.T) / 2)
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) != len(mean):
            raise PreconditionError(f"{len(self.labels)} labels for a {len(mean)}-dimensional law")
        if len(mean) and np.linalg.eigvalsh(self.cov).min() < -PSD_TOL * max(1.0, np.abs(cov).max()):
            raise PreconditionError("covariance is not positive semi-definite")

    @property
    def dim(self):
        return len(self.mean)

    def sample(self, n, seed):
        """``n`` draws via the symmetric square root (valid for singular covariances)."""
        w, V = np.linalg.eigh(self.cov)
        root = V * np.sqrt(np.clip(w, 0.0, None))
        z = np.random.default_rng(seed).standard_normal((n, self.dim))
        return self.mean + z @ root.T


@dataclass(frozen=True, eq=False)
class EmpiricalLaw:
    """A sample matrix (rows are draws) standing in for a law."""

    samples: np.ndarray
    labels: tuple
    seed: object = None
    intervention: Intervention = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "labels", tuple(self.labels))
        if s.shape[0] == 0:
            raise PreconditionError("empirical law has no rows")
        if s.shape[1] != len(self.labels):
            raise PreconditionError(f"{len(self.labels)} labels for {s.shape[1]} columns")
        if np.isnan(s).any():
            raise PreconditionError("empirical law contains missing values")

    @property
    def dim(self):
        return self.samples.shape[1]


def _merge_atoms(support, probs, tol=ATOM_TOL):
    """Group rows within ``tol`` of each other; returns the representatives and summed masses."""
    reps, mass = [], []
    for row, p in zip(support, probs):
        for k, r in enumerate(reps):
            if np.max(np.abs(r - row), initial=0.0) <= tol * max(1.0, np.max(np.abs(r), initial=0.0)):
                mass[k] += p
                break
        else:
            reps.append(row)
            mass.append(p)
    d = support.shape[1]
    return np.array(reps, dtype=float).reshape(-1, d), np.array(mass, dtype=float)


@dataclass(frozen=True, eq=False)
class FiniteLaw:
    """Law with finitely many atoms: rows of ``support`` with masses ``probs``.

    Atoms that coincide up to :data:`ATOM_TOL` are merged and zero-mass atoms dropped.
    """

    support: np.ndarray
    probs: np.ndarray
    labels: tuple

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float).reshape(-1)
        support = np.asarray(self.support, dtype=float).reshape(len(probs), -1)
        object.__setattr__(self, "labels", tuple(self.labels))
        if support.shape[1] != len(self.labels) and len(probs):
            raise PreconditionError(f"{len(self.labels)} labels for {support.shape[1]} columns")
        if len(probs) == 0 or (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9:
            raise PreconditionError("atom masses must be non-negative and sum to 1")
        keep = probs > 0
        support, probs = _merge_atoms(support[keep].reshape(-1, len(self.labels)), probs[keep])
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self):
        return len(self.labels)

    def sample(self, n, seed):
        rng = np.random.default_rng(seed)
        return self.support[rng.choice(len(self.probs), size=n, p=self.probs)]


@dataclass(frozen=True)
class EqualityVerdict:
    """Outcome of one law comparison.

    For ``closed-form`` the statistic is the largest absolute moment difference
    and equality means ``statistic <= threshold``.  For ``energy-test`` the
    statistic is the permutation p-value and equality means ``statistic > threshold``.
    """

    method: str
    equal: bool
    statistic: float
    threshold: float
    detail: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"method": self.method, "equal": self.equal, "statistic": self.statistic,
                "threshold": self.threshold, "detail": self.detail}


def closed_form_law(sem, i: Intervention = None) -> GaussianLaw:
    """Exact law of ``X`` under ``do(i)`` for a linear model with Gaussian or point-mass noise.

    Solves ``(I - A_do) mu = b_do + G E[e]`` and propagates the exogenous
    covariance; clamped coordinates come out as exact constants.
    """
    i = i or Intervention()
    sem_i = apply_intervention(sem, i)
    view = sem_i.structure.linear
    if view is None:
        raise NotApplicableError(f"model under {i} is not affine")
    used = [k for k in range(len(view.exogenous)) if np.any(view.loading[:, k])]
    mean_e, cov_e = sem_i.noise.gaussian_moments([view.exogenous[k] for k in used])
    G = view.loading[:, used]
    p = len(view.variables)
    M = np.eye(p) - view.matrix
    if np.linalg.cond(M) > SINGULAR_COND:
        raise SingularSystemError(f"I - A is singular under {i}")
    mu = np.linalg.solve(M, view.offset + G @ mean_e)
    B = np.linalg.solve(M, G)
    cov = B @ cov_e @ B.T
    idx = sem.index
    for name, value in i.targets.items():
        k = idx[name]
        mu[k] = value
        cov[k, :] = 0.0
        cov[:, k] = 0.0
    return GaussianLaw(mu, cov, sem.variables)


def _atoms(dist):
    if isinstance(dist, PointMass):
        return [(float(dist.value), 1.0)]
    if isinstance(dist, Bernoulli):
        return [(v, q) for v, q in ((0.0, 1.0 - dist.p), (1.0, dist.p)) if q > 0]
    raise NotApplicableError(f"{type(dist).__name__} noise has no finite support")


def finite_law(sem, i: Intervention = None) -> FiniteLaw:
    """Exact law of ``X`` under ``do(i)`` when every base noise has finite support.

    Enumerates the joint base-noise outcomes (at most :data:`MAX_ATOMS`) and
    solves the intervened equations once per outcome.
    """
    i = i or Intervention()
    sem_i = apply_intervention(sem, i)
    names = list(sem_i.noise.base)
    atoms = [_atoms(sem_i.noise.base[b]) for b in names]
    if np.prod([len(a) for a in atoms]) > MAX_ATOMS:
        raise NotApplicableError(f"more than {MAX_ATOMS} joint noise outcomes")
    combos = list(itertools.product(*atoms))
    n = len(combos)
    base = {b: np.array([c[k][0] for c in combos]) for k, b in enumerate(names)}
    probs = np.array([np.prod([a[1] for a in c]) for c in combos]).reshape(n)
    exo = {name: np.broadcast_to(np.asarray(evaluate(e, base), dtype=float), (n,)).copy()
           for name, e in sem_i.noise.exogenous.items()}
    return FiniteLaw(_solve_batch(sem_i, exo, n), probs, sem.variables)


def pushforward(law, tau):
    """Law of ``tau(X)`` when ``X`` follows ``law``.

    Gaussian laws need an affine ``tau``; empirical laws accept any transformation.
    """
    if tuple(law.labels) != tuple(tau.source):
        raise PreconditionError(f"law over {law.labels} but transformation expects {tau.source}")
    if isinstance(law, GaussianLaw):
        aff = tau.as_affine()
        if aff is None:
            raise NotApplicableError("non-affine transformation of a Gaussian law")
        T, c = aff
        return GaussianLaw(T @ law.mean + c, T @ law.cov @ T.T, tau.target)
    if isinstance(law, FiniteLaw):
        return FiniteLaw(tau.apply(law.support), law.probs, tau.target)
    return EmpiricalLaw(tau.apply(law.samples), tau.target, law.seed, law.intervention)


# --------------------------------------------------------------------------
# energy-distance permutation test


def _directions(d, extra, rng):
    axes = np.eye(d)
    if d == 1 or extra <= 0:
        return axes
    v = rng.standard_normal((extra, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.vstack([axes, v])


def energy_test(x, y, permutations=200, seed=0, directions=None):
    """Two-sample permutation test based on projected energy distances.

    The statistic averages the one-dimensional energy distance over the
    coordinate axes and ``directions`` random unit vectors (default ``d``)
    after scaling every coordinate by its pooled standard deviation; in one
    dimension it is the exact energy statistic.  Returns ``(p_value, statistic)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    y = y[:, None] if y.ndim == 1 else y
    if x.shape[1] != y.shape[1]:
        raise PreconditionError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    n_a, d = x.shape
    if n_a < 1 or len(y) < 1:
        raise PreconditionError("energy test needs non-empty samples")
    pooled = np.vstack([x, y])
    pooled = pooled - pooled.mean(axis=0)
    scale = pooled.std(axis=0)
    pooled = pooled / np.where(scale > 0, scale, 1.0)

    ss = np.random.SeedSequence(seed)
    dir_seed, perm_seed = ss.spawn(2)
    extra = d if directions is None else directions
    proj = pooled @ _directions(d, extra, np.random.default_rng(dir_seed)).T
    proj = proj[:, np.ptp(proj, axis=0) > 0]
    if proj.shape[1] == 0:
        return 1.0, 0.0
    order = np.ascontiguousarray(np.argsort(proj, axis=0, kind="stable").T)
    sorted_values = np.ascontiguousarray(np.take_along_axis(proj.T, order, axis=1))

    N = len(pooled)
    seeds = perm_seed.generate_state(permutations, dtype=np.uint64)
    labels = np.empty((permutations + 1, N), dtype=np.int8)
    labels[0, :n_a] = 1
    labels[0, n_a:] = 0
    labels[1:] = kernels.permutation_labels(seeds, N, n_a)
    stats = kernels.permutation_energy(sorted_values, order, labels, n_a)
    obs = stats[0]
    # ties up to round-off count as exceedances so both backends agree
    eps = 1e-7 * (abs(obs) + np.abs(stats[1:]).mean()) + 1e-12
    p = (1 + int(np.sum(stats[1:] >= obs - eps))) / (permutations + 1)
    return float(p), float(obs)


def _as_samples(law, n, seed):
    if isinstance(law, EmpiricalLaw):
        return law.samples
    return law.sample(n, seed)


def _as_finite(law):
    if isinstance(law, GaussianLaw) and not np.any(law.cov):
        return FiniteLaw(law.mean[None, :], [1.0], law.labels)
    return law


def _exact_finite(a, b, tol):
    a, b = _as_finite(a), _as_finite(b)
    kinds = {type(a), type(b)}
    if kinds == {FiniteLaw}:
        support = np.vstack([a.support, b.support])
        signed = np.concatenate([a.probs, -b.probs])
        _, gaps = _merge_atoms(support, signed)
        stat = float(np.max(np.abs(gaps), initial=0.0))
        return EqualityVerdict("closed-form", stat <= tol, stat, tol,
                               f"max atom mass difference {stat:.3e} over "
                               f"{len(a.probs)} and {len(b.probs)} atoms")
    if kinds == {FiniteLaw, GaussianLaw}:
        return EqualityVerdict("closed-form", False, 1.0, tol,
                               "atomic law against a continuous Gaussian")
    return None


def compare_laws(a, b, tol=1e-9, alpha=0.01, permutations=200, seed=0, directions=None):
    """Decide whether two laws over the same coordinates coincide.

    Two Gaussian laws are compared exactly (sup-norm of mean and covariance
    differences against ``tol``), and so are two finite laws (largest difference
    in the mass of any atom).  A finite law never equals a Gaussian with
    non-zero covariance, which has no atoms.  Otherwise an energy permutation test is run
    at level ``alpha``; a Gaussian operand is sampled to match the other size.
    """
    if a.dim != b.dim:
        raise PreconditionError(f"cannot compare laws of dimension {a.dim} and {b.dim}")
    if isinstance(a, GaussianLaw) and isinstance(b, GaussianLaw):
        dmean = float(np.max(np.abs(a.mean - b.mean), initial=0.0))
        dcov = float(np.max(np.abs(a.cov - b.cov), initial=0.0))
        stat = max(dmean, dcov)
        return EqualityVerdict("closed-form", stat <= tol, stat, tol,
                               f"max |mean diff| {dmean:.3e}, max |cov diff| {dcov:.3e}")
    exact = _exact_finite(a, b, tol)
    if exact is not None:
        return exact
    s_a, s_b = np.random.SeedSequence(seed).generate_state(2)
    n_ref = a.samples.shape[0] if isinstance(a, EmpiricalLaw) else b.samples.shape[0]
    xa = _as_samples(a, n_ref, s_a)
    xb = _as_samples(b, n_ref, s_b)
    p, energy = energy_test(xa, xb, permutations, seed, directions)
    return EqualityVerdict("energy-test", p > alpha, p, alpha,
                           f"energy statistic {energy:.4g} on {len(xa)} vs {len(xb)} draws, "
                           f"{permutations} permutations",
                           {"energy": energy})
