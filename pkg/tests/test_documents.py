import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exactsem import Intervention, documents
from exactsem.demos import DEMOS, build_demo, dynamics_spec
from exactsem.errors import ValidationError

from helpers import linear_sem, random_dag, random_interventions


def lightbulb_doc():
    return {
        "format": "exactsem-model/1",
        "variables": [{"name": "B1", "domain": "binary"}, {"name": "B2", "domain": "binary"},
                      {"name": "L", "domain": "binary"}],
        "exogenous": {"base": [{"name": f"U{k}", "dist": "bernoulli", "p": 0.5} for k in (1, 2, 3)],
                      "map": {"E1": "U1", "E2": "U2", "E3": "U3"}},
        "equations": {"B1": "E1", "B2": "E2", "L": "or(B1, B2, E3)"},
        "interventions": [{}, {"B1": 0}, {"B2": 0}, {"B1": 0, "B2": 0}],
    }


@pytest.mark.parametrize("name", sorted(DEMOS))
def test_demo_documents_round_trip(name):
    s = build_demo(name, 0)
    doc = documents.model_to_doc(s.target)
    again = documents.model_to_doc(documents.model_from_doc(documents.loads(documents.dumps(doc))))
    assert again == doc
    tau_doc = documents.tau_to_doc(s.tau)
    assert documents.tau_from_doc(tau_doc) == s.tau
    om_doc = documents.omega_to_doc(s.omega)
    assert documents.omega_to_doc(documents.omega_from_doc(om_doc)) == om_doc


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_models_round_trip(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 6))
    names = [f"X{k + 1}" for k in range(p)]
    sem = linear_sem(random_dag(rng, p), rng.normal(size=p), rng.uniform(0, 2, p),
                     interventions=random_interventions(rng, names, 4, values=tuple(rng.normal(size=3))))
    doc = documents.model_to_doc(sem)
    back = documents.model_from_doc(json.loads(documents.dumps(doc)))
    assert back.equations == sem.equations
    assert back.catalog == sem.catalog
    assert documents.model_to_doc(back) == doc


def test_dynamics_round_trip():
    spec = dynamics_spec()
    doc = documents.dynamics_to_doc(spec)
    back = documents.dynamics_from_doc(doc)
    np.testing.assert_array_equal(back.A, spec.A)
    assert back.catalog == spec.catalog
    assert documents.source_from_doc(doc).variables == spec.variables


def test_interventions_sugar_adds_null_family():
    sem = documents.model_from_doc(lightbulb_doc())
    assert sem.catalog.null_family is not None and len(sem.catalog) == 4
    assert sem.catalog.contains(Intervention({"B1": 0, "B2": 0}))


def test_json_errors_carry_line_and_column():
    with pytest.raises(ValidationError) as err:
        documents.loads('{\n  "variables": [1,,]\n}', "m.json")
    assert err.value.location == "m.json:2:19"


def test_undeclared_reference_location():
    doc = lightbulb_doc()
    doc["equations"]["L"] = "or(B1, B3, E3)"
    with pytest.raises(ValidationError) as err:
        documents.model_from_doc(doc)
    assert "'B3'" in str(err.value) and err.value.location.startswith("equations.L")


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.pop("variables"), "model"),
    (lambda d: d["equations"].pop("L"), "equations"),
    (lambda d: d.update(format="other/9"), "format"),
    (lambda d: d["exogenous"]["base"][0].update(dist="cauchy"), "exogenous"),
    (lambda d: d["equations"].update(Q="1"), "equations.Q"),
])
def test_malformed_models(mutate, where):
    doc = lightbulb_doc()
    mutate(doc)
    with pytest.raises(ValidationError) as err:
        documents.model_from_doc(doc)
    assert (err.value.location or "").startswith(where)


def test_dumps_is_canonical():
    doc = {"b": 1.0, "a": [1, 2]}
    assert documents.dumps(doc) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1.0\n}\n'
    with pytest.raises(ValueError):
        documents.dumps({"x": float("nan")})


def test_report_document_shape():
    s = build_demo("wrong1", 0)
    from exactsem import check_exact
    doc = documents.report_to_doc(check_exact(s.source, s.target, s.tau, s.omega), "0.1.0")
    assert doc["format"] == "exactsem-report/1"
    rep = doc["report"]
    assert rep["exact"] is False and rep["order_preservation"]["passed"] is False
    assert rep["config"]["seed"] == 0
