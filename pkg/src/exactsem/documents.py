"""JSON documents for models, transformations, intervention maps, dynamics and reports.

Every ``*_to_doc`` output is plain JSON data; :func:`dumps` renders it with
sorted keys so equal inputs give byte-identical files.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .expr import parse_expr, to_string
from .interventions import FiniteDomain, Intervention, InterventionCatalog, InterventionFamily, Interval
from .noise import Bernoulli, NoiseModel, Normal, PointMass, Uniform
from .sem import Sem, SolverConfig
from .transform import InterventionMap, OmegaRule, Transformation

MODEL_FORMAT = "exactsem-model/1"
TAU_FORMAT = "exactsem-tau/1"
OMEGA_FORMAT = "exactsem-omega/1"
DYNAMICS_FORMAT = "exactsem-dynamics/1"
REPORT_FORMAT = "exactsem-report/1"


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def loads(text: str, source: str = "<input>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ValidationError(err.msg, f"{source}:{err.lineno}:{err.colno}") from None


def load(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ValidationError(f"cannot read file ({err.strerror})", str(path)) from None
    return loads(text, str(path))


def _num(v, where):
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"expected a number, got {v!r}", where)
    return float(v)


def _finite(v, where):
    x = _num(v, where)
    if x is None or not math.isfinite(x):
        raise ValidationError(f"expected a finite number, got {v!r}", where)
    return x


def _obj(doc, where):
    if not isinstance(doc, dict):
        raise ValidationError("expected a JSON object", where)
    return doc


def _list(doc, where):
    if not isinstance(doc, list):
        raise ValidationError("expected a JSON array", where)
    return doc


def _str(v, where):
    if not isinstance(v, str) or not v:
        raise ValidationError(f"expected a non-empty string, got {v!r}", where)
    return v


def _bound(v):
    return None if math.isinf(v) else v


# --------------------------------------------------------------------------
# pieces


_DISTS = {
    "bernoulli": (Bernoulli, ("p",)),
    "normal": (Normal, ("mean", "var")),
    "uniform": (Uniform, ("low", "high")),
    "point": (PointMass, ("value",)),
}


def dist_to_doc(d):
    for key, (cls, fields) in _DISTS.items():
        if type(d) is cls:
            out = {"dist": key}
            out.update({f: float(getattr(d, f)) for f in fields})
            return out
    raise TypeError(f"unknown distribution {d!r}")


def dist_from_doc(doc, where):
    doc = _obj(doc, where)
    kind = doc.get("dist")
    if kind not in _DISTS:
        raise ValidationError(f"unknown distribution {kind!r} (expected one of {sorted(_DISTS)})",
                              f"{where}.dist")
    cls, fields = _DISTS[kind]
    extra = set(doc) - set(fields) - {"dist", "name"}
    if extra:
        raise ValidationError(f"unexpected keys {sorted(extra)}", where)
    kwargs = {}
    for f in fields:
        if f in doc:
            kwargs[f] = _finite(doc[f], f"{where}.{f}")
        elif kind != "normal":
            raise ValidationError(f"missing {f!r}", where)
    try:
        return cls(**kwargs)
    except ValidationError as err:
        raise ValidationError(str(err), where) from None


def domain_to_doc(d):
    if isinstance(d, FiniteDomain):
        return {"values": list(d.values)}
    return {"interval": [_bound(d.lo), _bound(d.hi)]}


def domain_from_doc(doc, where):
    doc = _obj(doc, where)
    if "values" in doc:
        vals = [_finite(v, f"{where}.values[{k}]") for k, v in enumerate(_list(doc["values"], where))]
        return FiniteDomain(tuple(vals))
    if "interval" in doc:
        pair = _list(doc["interval"], where)
        if len(pair) != 2:
            raise ValidationError("interval needs [lo, hi]", where)
        lo = _num(pair[0], f"{where}.interval[0]")
        hi = _num(pair[1], f"{where}.interval[1]")
        try:
            return Interval(-math.inf if lo is None else lo, math.inf if hi is None else hi)
        except ValidationError as err:
            raise ValidationError(str(err), where) from None
    raise ValidationError("domain needs 'values' or 'interval'", where)


def intervention_to_doc(i: Intervention):
    return i.targets


def intervention_from_doc(doc, where, variables=None):
    doc = _obj(doc, where)
    targets = {}
    for name, v in doc.items():
        if variables is not None and name not in variables:
            raise ValidationError(f"undeclared variable {name!r}", where)
        targets[name] = _finite(v, f"{where}.{name}")
    return Intervention(targets)


def family_to_doc(f: InterventionFamily):
    return {"label": f.label, "targets": list(f.targets),
            "domains": [domain_to_doc(d) for d in f.domains]}


def family_from_doc(doc, where, variables=None):
    doc = _obj(doc, where)
    label = _str(doc.get("label"), f"{where}.label")
    targets = [_str(t, f"{where}.targets[{k}]")
               for k, t in enumerate(_list(doc.get("targets", []), f"{where}.targets"))]
    if variables is not None:
        for t in targets:
            if t not in variables:
                raise ValidationError(f"undeclared variable {t!r}", f"{where}.targets")
    domains = [domain_from_doc(d, f"{where}.domains[{k}]")
               for k, d in enumerate(_list(doc.get("domains", []), f"{where}.domains"))]
    try:
        return InterventionFamily(label, tuple(targets), tuple(domains))
    except ValidationError as err:
        raise ValidationError(str(err), where) from None


def catalog_from_doc(doc, where, variables):
    """Families from ``families`` plus singleton families for each entry of ``interventions``."""
    fams = []
    seen = set()
    for k, item in enumerate(_list(doc.get("interventions", []), f"{where}interventions")):
        i = intervention_from_doc(item, f"{where}interventions[{k}]", variables)
        if i in seen:
            raise ValidationError(f"{i} listed twice", f"{where}interventions[{k}]")
        seen.add(i)
        fams.append(InterventionFamily.single("null" if i.is_null else str(i), i))
    for k, item in enumerate(_list(doc.get("families", []), f"{where}families")):
        fams.append(family_from_doc(item, f"{where}families[{k}]", variables))
    if not any(f.is_null for f in fams):
        fams.insert(0, InterventionFamily("null", (), ()))
    try:
        return InterventionCatalog(fams)
    except ValidationError as err:
        raise ValidationError(str(err), f"{where}families") from None


def noise_to_doc(noise: NoiseModel):
    return {"base": [dict(name=b, **dist_to_doc(d)) for b, d in noise.base.items()],
            "map": {e: to_string(x) for e, x in noise.exogenous.items()}}


def noise_from_doc(doc, where):
    doc = _obj(doc, where)
    base = {}
    for k, item in enumerate(_list(doc.get("base", []), f"{where}.base")):
        loc = f"{where}.base[{k}]"
        name = _str(_obj(item, loc).get("name"), f"{loc}.name")
        if name in base:
            raise ValidationError(f"base noise {name!r} declared twice", loc)
        base[name] = dist_from_doc(item, loc)
    exo = {}
    for name, text in _obj(doc.get("map", {}), f"{where}.map").items():
        exo[name] = parse_expr(_str(text, f"{where}.map.{name}"), (), tuple(base), f"{where}.map.{name}")
    try:
        return NoiseModel(base, exo)
    except ValidationError as err:
        raise ValidationError(str(err), where) if not err.location else err from None


# --------------------------------------------------------------------------
# models


def model_to_doc(sem: Sem):
    variables = [{"name": v, "domain": sem.domains[v]} if sem.domains[v] != "real" else v
                 for v in sem.variables]
    return {
        "format": MODEL_FORMAT,
        "variables": variables,
        "exogenous": noise_to_doc(sem.noise),
        "equations": {v: to_string(sem.equations[v]) for v in sem.variables},
        "families": [family_to_doc(f) for f in sem.catalog],
        "solver": {"tol": sem.solver.tol, "max_iter": sem.solver.max_iter,
                   "damping": sem.solver.damping},
    }


def _variables_from_doc(doc):
    names, domains = [], {}
    for k, item in enumerate(_list(doc.get("variables"), "variables")):
        loc = f"variables[{k}]"
        if isinstance(item, dict):
            name = _str(item.get("name"), f"{loc}.name")
            domains[name] = item.get("domain", "real")
        else:
            name = _str(item, loc)
        if name in names:
            raise ValidationError(f"variable {name!r} declared twice", loc)
        names.append(name)
    return tuple(names), domains


def model_from_doc(doc) -> Sem:
    doc = _obj(doc, "model")
    fmt = doc.get("format", MODEL_FORMAT)
    if fmt != MODEL_FORMAT:
        raise ValidationError(f"unsupported format {fmt!r}", "format")
    if "variables" not in doc:
        raise ValidationError("missing 'variables'", "model")
    variables, domains = _variables_from_doc(doc)
    noise = noise_from_doc(doc.get("exogenous", {}), "exogenous")
    eqdoc = _obj(doc.get("equations", {}), "equations")
    for name in eqdoc:
        if name not in variables:
            raise ValidationError(f"equation for undeclared variable {name!r}", f"equations.{name}")
    eqs = {}
    for v in variables:
        if v not in eqdoc:
            raise ValidationError(f"no equation for {v!r}", "equations")
        eqs[v] = parse_expr(_str(eqdoc[v], f"equations.{v}"), variables, noise.exo_names,
                            f"equations.{v}")
    catalog = catalog_from_doc(doc, "", set(variables))
    sdoc = _obj(doc.get("solver", {}), "solver")
    try:
        solver = SolverConfig(**{k: sdoc[k] for k in ("tol", "max_iter", "damping") if k in sdoc})
    except TypeError as err:
        raise ValidationError(str(err), "solver") from None
    return Sem(variables, eqs, noise, catalog, domains, solver)


# --------------------------------------------------------------------------
# tau and omega


def tau_to_doc(tau: Transformation):
    doc = {"format": TAU_FORMAT, "kind": tau.kind, "source": list(tau.source),
           "target": list(tau.target)}
    if tau.kind == "projection":
        doc["keep"] = [tau.source[k] for k in tau.indices]
    elif tau.kind == "affine":
        doc["matrix"] = tau.matrix.tolist()
        doc["offset"] = tau.offset.tolist()
    else:
        doc["exprs"] = [to_string(e) for e in tau.exprs]
    return doc


def tau_from_doc(doc) -> Transformation:
    doc = _obj(doc, "tau")
    source = tuple(_str(s, f"source[{k}]") for k, s in enumerate(_list(doc.get("source"), "source")))
    target = tuple(_str(s, f"target[{k}]") for k, s in enumerate(_list(doc.get("target"), "target")))
    kind = doc.get("kind")
    if kind == "projection":
        keep = _list(doc.get("keep"), "keep")
        pos = {v: k for k, v in enumerate(source)}
        bad = [v for v in keep if v not in pos]
        if bad:
            raise ValidationError(f"unknown source coordinates {bad}", "keep")
        return Transformation("projection", source, target, indices=tuple(pos[v] for v in keep))
    if kind == "affine":
        rows = _list(doc.get("matrix"), "matrix")
        M = [[_finite(x, f"matrix[{r}][{c}]") for c, x in enumerate(_list(row, f"matrix[{r}]"))]
             for r, row in enumerate(rows)]
        off = [_finite(x, f"offset[{k}]") for k, x in enumerate(_list(doc.get("offset", [0.0] * len(M)),
                                                                    "offset"))]
        return Transformation.affine(source, target, np.array(M).reshape(len(target), len(source)), off)
    if kind == "expressions":
        exprs = [parse_expr(_str(t, f"exprs[{k}]"), source, (), f"exprs[{k}]")
                 for k, t in enumerate(_list(doc.get("exprs"), "exprs"))]
        return Transformation.expressions(source, target, exprs)
    raise ValidationError(f"unknown kind {kind!r} (projection, affine or expressions)", "kind")


def omega_to_doc(omega: InterventionMap):
    return {
        "format": OMEGA_FORMAT,
        "rules": [{"source": r.source, "target": r.target, "matrix": [list(row) for row in r.matrix],
                   "offset": list(r.offset)} for r in omega.rules],
        "pairs": [{"from": intervention_to_doc(a), "to": intervention_to_doc(b)} for a, b in omega.pairs],
    }


def omega_from_doc(doc) -> InterventionMap:
    doc = _obj(doc, "omega")
    rules = []
    for k, item in enumerate(_list(doc.get("rules", []), "rules")):
        loc = f"rules[{k}]"
        item = _obj(item, loc)
        matrix = [[_finite(x, f"{loc}.matrix[{r}][{c}]") for c, x in enumerate(_list(row, f"{loc}.matrix"))]
                  for r, row in enumerate(_list(item.get("matrix", []), f"{loc}.matrix"))]
        offset = [_finite(x, f"{loc}.offset[{c}]")
                  for c, x in enumerate(_list(item.get("offset", []), f"{loc}.offset"))]
        rules.append(OmegaRule(_str(item.get("source"), f"{loc}.source"),
                               _str(item.get("target"), f"{loc}.target"), matrix, offset))
    pairs = []
    for k, item in enumerate(_list(doc.get("pairs", []), "pairs")):
        loc = f"pairs[{k}]"
        item = _obj(item, loc)
        pairs.append((intervention_from_doc(item.get("from", {}), f"{loc}.from"),
                      intervention_from_doc(item.get("to", {}), f"{loc}.to")))
    return InterventionMap(tuple(rules), tuple(pairs))


# --------------------------------------------------------------------------
# dynamics


def dynamics_to_doc(spec):
    return {
        "format": DYNAMICS_FORMAT,
        "A": spec.A.tolist(),
        "variables": list(spec.variables),
        "exogenous": noise_to_doc(spec.noise),
        "noise_outputs": list(spec.exogenous),
        "families": [family_to_doc(f) for f in spec.catalog],
        "horizon": spec.horizon,
        "tol": spec.tol,
    }


def dynamics_from_doc(doc):
    from .constructors import DynamicalSpec
    doc = _obj(doc, "dynamics")
    rows = _list(doc.get("A"), "A")
    A = [[_finite(x, f"A[{r}][{c}]") for c, x in enumerate(_list(row, f"A[{r}]"))]
         for r, row in enumerate(rows)]
    if any(len(row) != len(A) for row in A):
        raise ValidationError("A must be square", "A")
    p = len(A)
    variables = tuple(doc.get("variables") or (f"X{k + 1}" for k in range(p)))
    noise = noise_from_doc(doc.get("exogenous", {}), "exogenous")
    outputs = doc.get("noise_outputs")
    catalog = catalog_from_doc(doc, "", set(variables))
    horizon = doc.get("horizon", 200)
    if not isinstance(horizon, int) or horizon < 1:
        raise ValidationError("horizon must be a positive integer", "horizon")
    tol = _finite(doc.get("tol", 1e-6), "tol")
    try:
        return DynamicalSpec(np.array(A), noise, catalog, variables,
                             tuple(outputs) if outputs else None, horizon, tol)
    except ValidationError:
        raise
    except Exception as err:
        raise ValidationError(str(err), "dynamics") from None


def source_from_doc(doc):
    """A model or dynamics document, dispatched on its ``format``/``A`` keys."""
    if isinstance(doc, dict) and (doc.get("format") == DYNAMICS_FORMAT or "A" in doc):
        return dynamics_from_doc(doc)
    return model_from_doc(doc)


# --------------------------------------------------------------------------
# reports


def report_to_doc(report, tool_version):
    return {"format": REPORT_FORMAT, "tool": f"exactsem {tool_version}", "report": report.to_dict()}
