"""Bundled scenarios: the lightbulb model, the two flawed intervention maps,
micro-to-macro averaging, equilibrated dynamics and layered marginalisation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constructors import (DynamicalSpec, aggregate_micro_macro, equilibrate, marginalize_childless,
                           marginalize_nonintervened)
from .interventions import Intervention, InterventionCatalog, InterventionFamily, Interval
from .noise import Bernoulli, NoiseModel, Normal, PointMass
from .sem import make_sem
from .expr import Exo
from .transform import CheckConfig, InterventionMap, Transformation, compose_transformations


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    source: object
    target: object
    tau: Transformation
    omega: InterventionMap
    expected_exact: bool
    description: str


def lightbulb_model():
    """Two switches and a bulb lit if either switch is on or a third cause fires."""
    return make_sem(
        {"B1": "E1", "B2": "E2", "L": "or(B1, B2, E3)"},
        {"U1": Bernoulli(0.5), "U2": Bernoulli(0.5), "U3": Bernoulli(0.5)},
        {"E1": "U1", "E2": "U2", "E3": "U3"},
        interventions=[{}, {"B1": 0}, {"B2": 0}, {"B1": 0, "B2": 0}],
        domains={"B1": "binary", "B2": "binary", "L": "binary"},
    )


def _lightbulbs(config):
    sem = lightbulb_model()
    t = marginalize_childless(sem, {"L"}, config=config)
    return Scenario("lightbulbs", sem, t.model, t.tau, t.omega, True,
                    "drop the childless bulb L; switches keep their laws")


_SUM_TAU = ((1.0, 1.0, 0.0), (0.0, 0.0, 1.0))
_X_CATALOG = [{}, {"X2": 0}, {"X1": 0, "X2": 0}]


def _wrong1(config):
    m_x = make_sem({"X1": "E1", "X2": "E2", "X3": "X1 + X2 + E3"},
                   {"U1": Normal(0, 1), "U3": Normal(0, 1)},
                   {"E1": "U1", "E2": "-U1", "E3": "U3"}, interventions=_X_CATALOG)
    m_y = make_sem({"Y1": "F1", "Y2": "Y1 + F2"}, {"V1": Normal(0, 1), "V2": Normal(0, 1)},
                   {"F1": "V1", "F2": "V2"}, interventions=[{}, {"Y1": 0}])
    tau = Transformation.affine(m_x.variables, m_y.variables, _SUM_TAU)
    omega = InterventionMap(pairs=(
        (Intervention(), Intervention({"Y1": 0})),
        (Intervention({"X2": 0}), Intervention()),
        (Intervention({"X1": 0, "X2": 0}), Intervention({"Y1": 0})),
    ))
    return Scenario("wrong1", m_x, m_y, tau, omega, False,
                    "laws match but omega sends the null intervention to do(Y1=0)")


def _wrong2(config):
    m_x = make_sem({"X1": "E1", "X2": "E2", "X3": "X1 + X2 + E3"},
                   {"U1": PointMass(1.0), "U2": Normal(0, 1), "U3": Normal(0, 1)},
                   {"E1": "U1", "E2": "U2", "E3": "U3"}, interventions=_X_CATALOG)
    m_y = make_sem({"Y1": "1 + F1", "Y2": "Y1 + F2"}, {"V1": Normal(0, 1), "V2": Normal(0, 1)},
                   {"F1": "V1", "F2": "V2"}, interventions=[{}, {"Y1": 0}, {"Y1": 1}])
    tau = Transformation.affine(m_x.variables, m_y.variables, _SUM_TAU)
    omega = InterventionMap(pairs=(
        (Intervention(), Intervention()),
        (Intervention({"X2": 0}), Intervention({"Y1": 1})),
        (Intervention({"X1": 0, "X2": 0}), Intervention({"Y1": 0})),
    ))
    return Scenario("wrong2", m_x, m_y, tau, omega, False,
                    "laws match but do(X2=0) <= do(X1=0, X2=0) maps to do(Y1=1), do(Y1=0)")


def micro_macro_model(A=((1.0, 3.0, 2.0), (3.0, 1.0, 2.0)), w_box=(-1.0, 1.0)):
    """``W_i = E_i``, ``Z = A W + F`` with standard normal noise and the four theorem families."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    eqs = {f"W{k + 1}": f"E{k + 1}" for k in range(n)}
    for r in range(m):
        terms = " + ".join(f"{float(A[r, c])!r} * W{c + 1}" for c in range(n))
        eqs[f"Z{r + 1}"] = f"{terms} + F{r + 1}"
    base = {f"U{k + 1}": Normal(0, 1) for k in range(n + m)}
    exo = {f"E{k + 1}": f"U{k + 1}" for k in range(n)}
    exo.update({f"F{k + 1}": f"U{n + k + 1}" for k in range(m)})
    W = tuple(f"W{k + 1}" for k in range(n))
    Z = tuple(f"Z{k + 1}" for k in range(m))
    wdom, zdom = (Interval(*w_box),) * n, (Interval(),) * m
    fams = [InterventionFamily("W", W, wdom), InterventionFamily("Z", Z, zdom),
            InterventionFamily("WZ", W + Z, wdom + zdom)]
    return make_sem(eqs, base, exo, families=fams)


def _micro_macro(config):
    sem = micro_macro_model()
    t = aggregate_micro_macro(sem, config=config)
    return Scenario("micro-macro", sem, t.model, t.tau, t.omega, True,
                    "average 3 micro causes and 2 micro effects; column sums of A all equal 4")


def dynamics_spec():
    noise = NoiseModel({"U1": Normal(0, 1), "U2": Normal(0, 1)}, {"E1": Exo("U1"), "E2": Exo("U2")})
    fams = [InterventionFamily("null", (), ()),
            InterventionFamily("clamp1", ("X1",), (Interval(-2, 2),)),
            InterventionFamily("clamp2", ("X2",), (Interval(-2, 2),)),
            InterventionFamily("clamp12", ("X1", "X2"), (Interval(-2, 2), Interval(-2, 2)))]
    return DynamicalSpec(np.array([[0.5, 0.2], [0.1, 0.3]]), noise, InterventionCatalog(fams))


def _dynamics(config):
    spec = dynamics_spec()
    t = equilibrate(spec, config=config)
    return Scenario("dynamics", spec, t.model, t.tau, t.omega, True,
                    "equilibrium of x_{t+1} = A x_t + E with ||A||_2 < 1")


def fig3_model():
    """Upstream causes N*, intermediates I*, downstream effects D* around X1, X2, X3."""
    eqs = {
        "N3": "EN3",
        "N1": "0.8 * N3 + EN1",
        "N2": "0.5 * N1 - 0.3 * N3 + EN2",
        "X1": "1.2 * N1 + EX1",
        "I12": "0.9 * X1 + EI12",
        "X2": "-0.7 * I12 + EX2",
        "I23": "1.1 * X2 + EI23",
        "I13a": "0.6 * X1 + EI13a",
        "I13b": "-1.5 * I13a + EI13b",
        "X3": "0.4 * I23 + 0.8 * I13b + EX3",
        "D2": "X2 + ED2",
        "D1": "0.5 * X3 - D2 + ED1",
        "D3": "D1 + 2 * D2 + ED3",
    }
    exo = {f"E{v}": f"U{v}" for v in eqs}
    base = {f"U{v}": Normal(0, 1) for v in eqs}
    fams = [InterventionFamily("X1", ("X1",), (Interval(-1, 1),)),
            InterventionFamily("X2", ("X2",), (Interval(-1, 1),)),
            InterventionFamily("X1X3", ("X1", "X3"), (Interval(-1, 1), Interval(-1, 1)))]
    return make_sem(eqs, base, exo, interventions=[{}, {"X3": 0.5}], families=fams)


FIG3_DOWNSTREAM = ("D1", "D2", "D3")
FIG3_HIDDEN = ("I12", "I23", "I13a", "I13b", "N1", "N2", "N3")


def _fig3(config):
    sem = fig3_model()
    first = marginalize_childless(sem, FIG3_DOWNSTREAM, config=config)
    second = marginalize_nonintervened(first.model, FIG3_HIDDEN, config=config)
    tau, omega = compose_transformations(first, second, sem.catalog, first.model.catalog,
                                         second.model.catalog)
    return Scenario("fig3-marginalize", sem, second.model, tau, omega, True,
                    "drop downstream effects, then intermediates and upstream causes")


DEMOS = {
    "lightbulbs": _lightbulbs,
    "wrong1": _wrong1,
    "wrong2": _wrong2,
    "micro-macro": _micro_macro,
    "dynamics": _dynamics,
    "fig3-marginalize": _fig3,
}


def build_demo(name, seed=0):
    """Construct the named scenario; constructor certification uses ``seed``."""
    if name not in DEMOS:
        raise KeyError(name)
    return DEMOS[name](CheckConfig(seed=seed))
