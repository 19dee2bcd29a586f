"""Random model generators shared by the test modules."""
import numpy as np

from exactsem import (Intervention, InterventionCatalog, InterventionFamily, Interval, NoiseModel,
                      Normal, PointMass, Sem)
from exactsem.constructors import DynamicalSpec
from exactsem.expr import Const, Exo, Var, linear_expr


def linear_sem(A, b=None, variances=None, interventions=(), families=(), names=None, exo=None):
    """``x = A x + b + e`` with independent normal noise (variance 0 gives a point mass).

    ``exo`` optionally overrides the exogenous map (name -> Expr over ``U*`` base noises).
    """
    A = np.asarray(A, dtype=float)
    p = A.shape[0]
    names = names or tuple(f"X{k + 1}" for k in range(p))
    b = np.zeros(p) if b is None else np.asarray(b, dtype=float)
    variances = np.ones(p) if variances is None else np.asarray(variances, dtype=float)
    base = {f"U{k + 1}": (Normal(0.0, float(v)) if v > 0 else PointMass(0.0))
            for k, v in enumerate(variances)}
    exo = exo or {f"E{k + 1}": Exo(f"U{k + 1}") for k in range(p)}
    eqs = {}
    for r, v in enumerate(names):
        terms = [(A[r, c], Var(names[c])) for c in range(p)]
        terms.append((1.0, Exo(f"E{r + 1}")))
        eqs[v] = linear_expr(terms, b[r])
    fams = [InterventionFamily.single("null" if i.is_null else str(i), i)
            for i in (j if isinstance(j, Intervention) else Intervention(j) for j in interventions)]
    fams += list(families)
    if not any(f.is_null for f in fams):
        fams.insert(0, InterventionFamily("null", (), ()))
    return Sem(names, eqs, NoiseModel(base, exo), InterventionCatalog(fams))


def random_dag(rng, p, density=0.5, scale=1.0):
    """Strictly lower-triangular coefficient matrix (variables in topological order)."""
    A = np.tril(rng.normal(0, scale, (p, p)), -1)
    A *= rng.random((p, p)) < density
    return A


def random_interventions(rng, names, count, values=(-1.0, 0.0, 1.0, 2.0), max_targets=3):
    out = {Intervention()}
    names = list(names)
    tries = 0
    while len(out) < count and tries < 200 and names:
        tries += 1
        k = int(rng.integers(1, min(max_targets, len(names)) + 1))
        targets = rng.choice(names, size=k, replace=False)
        out.add(Intervention({t: float(rng.choice(values)) for t in targets}))
    return sorted(out, key=lambda i: (len(i), str(i)))


def random_contraction(rng, p, norm=0.9):
    """Random ``p x p`` matrix with operator 2-norm at most ``norm``."""
    A = rng.normal(size=(p, p))
    return A * (rng.uniform(0.1, norm) / np.linalg.norm(A, 2))


def random_dynamics(rng, p, norm=0.9, noise="normal"):
    from exactsem import Uniform
    names = tuple(f"X{k + 1}" for k in range(p))
    if noise == "normal":
        base = {f"U{k + 1}": Normal(float(rng.normal()), float(rng.uniform(0.5, 2))) for k in range(p)}
    else:
        base = {f"U{k + 1}": Uniform(-1.0, 1.0) for k in range(p)}
    nm = NoiseModel(base, {f"E{k + 1}": Exo(f"U{k + 1}") for k in range(p)})
    fams = [InterventionFamily("null", (), ())]
    for s in range(int(rng.integers(1, 4))):
        k = int(rng.integers(1, p + 1))
        targets = tuple(sorted(rng.choice(names, size=k, replace=False)))
        fam = InterventionFamily(f"clamp{s}", targets, (Interval(-2, 2),) * k)
        if all(f.key != fam.key for f in fams):
            fams.append(fam)
    return DynamicalSpec(random_contraction(rng, p, norm), nm, InterventionCatalog(fams), names)
