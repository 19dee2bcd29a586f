import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exactsem import Intervention, Transformation, make_sem
from exactsem import _energy_py, kernels
from exactsem.demos import lightbulb_model
from exactsem.distributions import (MAX_ATOMS, EmpiricalLaw, FiniteLaw, GaussianLaw, closed_form_law,
                                    compare_laws, energy_test, finite_law, pushforward)
from exactsem.expr import parse_expr
from exactsem.errors import NotApplicableError, PreconditionError, SingularSystemError
from exactsem.noise import Bernoulli, Normal, PointMass, Uniform
from exactsem.sem import sample, solve_given_noise

from helpers import linear_sem, random_dag


def chain():
    return make_sem({"X1": "E1", "X2": "X1 + E2"}, {"U1": Normal(0, 1), "U2": Normal(0, 1)},
                    {"E1": "U1", "E2": "U2"}, interventions=[{}, {"X1": 1}])


def brute_energy(a, b):
    """Scaled one-dimensional energy V-statistic by direct double sums."""
    E = (2 * np.abs(a[:, None] - b[None]).mean() - np.abs(a[:, None] - a[None]).mean()
         - np.abs(b[:, None] - b[None]).mean())
    return E * len(a) * len(b) / (len(a) + len(b))


def test_closed_form_examples():
    law = closed_form_law(chain())
    np.testing.assert_allclose(law.mean, [0, 0], atol=1e-15)
    np.testing.assert_allclose(law.cov, [[1, 1], [1, 2]], atol=1e-15)
    law = closed_form_law(chain(), Intervention({"X1": 1}))
    np.testing.assert_allclose(law.mean, [1, 1])
    np.testing.assert_allclose(law.cov, [[0, 0], [0, 1]])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_clamping_everything_gives_point_mass(seed):
    rng = np.random.default_rng(seed)
    sem = linear_sem(random_dag(rng, 4), rng.normal(size=4))
    targets = {v: float(rng.normal()) for v in sem.variables}
    law = closed_form_law(sem, Intervention(targets))
    np.testing.assert_array_equal(law.mean, list(targets.values()))
    assert not law.cov.any()


def test_closed_form_errors():
    with pytest.raises(NotApplicableError):
        closed_form_law(lightbulb_model())
    sem = make_sem({"A": "B + F1", "B": "A + F2"}, {"U1": Normal(0, 1), "U2": Normal(0, 1)},
                   {"F1": "U1", "F2": "U2"})
    with pytest.raises(SingularSystemError):
        closed_form_law(sem)
    sem = make_sem({"A": "F1"}, {"U1": Bernoulli(0.5)}, {"F1": "U1"})
    with pytest.raises(NotApplicableError):
        closed_form_law(sem)


def test_point_mass_noise_is_gaussian_degenerate():
    sem = make_sem({"A": "F1 + 1"}, {"U1": PointMass(2.0)}, {"F1": "U1"})
    law = closed_form_law(sem)
    assert law.mean.tolist() == [3.0] and law.cov.tolist() == [[0.0]]


def test_dependent_exogenous_noise():
    sem = make_sem({"A": "F1", "B": "F2"}, {"U": Normal(0, 1)}, {"F1": "U", "F2": "-U"})
    np.testing.assert_allclose(closed_form_law(sem).cov, [[1, -1], [-1, 1]])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_closed_form_matches_monte_carlo_moments(seed):
    rng = np.random.default_rng(seed)
    sem = linear_sem(random_dag(rng, 4), rng.normal(size=4), rng.uniform(0.5, 2, 4))
    i = Intervention({"X2": 1.5})
    law = closed_form_law(sem, i)
    n = 20_000
    x = sample(sem, i, n, seed)
    se = np.sqrt(np.diag(law.cov) / n)
    assert np.all(np.abs(x.mean(axis=0) - law.mean) <= 6 * se + 1e-12)
    emp = np.cov(x.T)
    sd = np.sqrt(np.outer(np.diag(law.cov), np.diag(law.cov)) * 2 / n) + 1e-12
    assert np.all(np.abs(emp - law.cov) <= 8 * sd + 1e-12)


def test_pushforward_examples():
    law = closed_form_law(chain())
    tau = Transformation.affine(("X1", "X2"), ("S",), [[1, 1]])
    out = pushforward(law, tau)
    assert out.mean.tolist() == [0.0] and out.cov.tolist() == [[5.0]]
    same = pushforward(law, Transformation.identity(("X1", "X2")))
    np.testing.assert_array_equal(same.cov, law.cov)
    x = sample(lightbulb_model(), Intervention(), 50, 1)
    emp = EmpiricalLaw(x, ("B1", "B2", "L"))
    proj = pushforward(emp, Transformation.projection(("B1", "B2", "L"), ["L"]))
    np.testing.assert_array_equal(proj.samples[:, 0], x[:, 2])
    with pytest.raises(PreconditionError):
        pushforward(law, Transformation.identity(("A", "B")))


def test_pushforward_nonlinear_gaussian_not_applicable():
    tau = Transformation.expressions(("X1", "X2"), ("P",), [parse_expr("X1 * X2", ("X1", "X2"))])
    with pytest.raises(NotApplicableError):
        pushforward(closed_form_law(chain()), tau)


def test_gaussian_law_validation_and_sampling():
    with pytest.raises(PreconditionError):
        GaussianLaw([0, 0], [[1, 2], [2, 1]], ("a", "b"))
    with pytest.raises(PreconditionError):
        GaussianLaw([0], [[1]], ("a", "b"))
    law = GaussianLaw([1, 2], [[1, 1], [1, 1]], ("a", "b"))
    x = law.sample(1000, 3)
    np.testing.assert_allclose(x[:, 1] - x[:, 0], 1.0, atol=1e-9)


def test_compare_laws_closed_form():
    law = closed_form_law(chain())
    v = compare_laws(law, law)
    assert v.equal and v.statistic == 0 and v.method == "closed-form"
    shifted = GaussianLaw(law.mean + 1, law.cov, law.labels)
    assert not compare_laws(law, shifted, tol=1e-9).equal
    with pytest.raises(PreconditionError):
        compare_laws(law, GaussianLaw([0], [[1]], ("a",)))


def test_compare_laws_mixed_uses_energy_test():
    law = closed_form_law(chain())
    emp = EmpiricalLaw(law.sample(2000, 5), law.labels)
    v = compare_laws(law, emp, seed=3)
    assert v.method == "energy-test" and v.equal
    far = EmpiricalLaw(law.sample(2000, 5) + [1.0, 0.0], law.labels)
    assert not compare_laws(law, far, seed=3).equal


@pytest.mark.parametrize("targets, p_lit", [({}, 7 / 8), ({"B1": 0}, 3 / 4), ({"B1": 1}, 1.0),
                                             ({"B1": 0, "B2": 0}, 1 / 2)])
def test_finite_law_lightbulbs(targets, p_lit):
    law = finite_law(lightbulb_model(), Intervention(targets))
    assert np.isclose(law.probs.sum(), 1.0)
    lit = law.probs[law.support[:, 2] == 1].sum()
    assert lit == pytest.approx(p_lit, abs=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.05, 0.95), min_size=3, max_size=3), st.integers(-2, 2))
def test_finite_law_matches_outcome_enumeration(ps, c):
    sem = make_sem({"X": "E1 + E2", "Y": f"{c} * X * E3 + E3"},
                   {f"U{k}": Bernoulli(p) for k, p in enumerate(ps, 1)},
                   {"E1": "U1", "E2": "U2", "E3": "U3"})
    expected = {}
    for bits in np.ndindex(2, 2, 2):
        mass = np.prod([p if b else 1 - p for p, b in zip(ps, bits)])
        x = solve_given_noise(sem, Intervention(), {f"E{k}": b for k, b in enumerate(bits, 1)})
        key = (x["X"], x["Y"])
        expected[key] = expected.get(key, 0.0) + mass
    law = finite_law(sem)
    got = {tuple(row): q for row, q in zip(law.support, law.probs)}
    assert got.keys() == expected.keys()
    assert all(np.isclose(got[k], expected[k], atol=1e-12) for k in expected)


def test_finite_law_not_applicable():
    with pytest.raises(NotApplicableError):
        finite_law(make_sem({"X": "E"}, {"U": Uniform(0, 1)}, {"E": "U"}))
    wide = make_sem({"X": " + ".join(f"E{k}" for k in range(13))},
                    {f"U{k}": Bernoulli(0.5) for k in range(13)}, {f"E{k}": f"U{k}" for k in range(13)})
    assert 2 ** 13 > MAX_ATOMS
    with pytest.raises(NotApplicableError):
        finite_law(wide)


def test_finite_law_merges_atoms_and_pushes_forward():
    law = FiniteLaw([[0.0, 1.0], [0.0, 1.0 + 1e-13], [1.0, 0.0]], [0.25, 0.25, 0.5], ("a", "b"))
    assert len(law.probs) == 2 and np.allclose(sorted(law.probs), [0.5, 0.5])
    tau = Transformation.affine(("a", "b"), ("s",), [[1.0, 1.0]])
    pushed = pushforward(law, tau)
    assert pushed.support.shape == (1, 1) and pushed.probs[0] == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        FiniteLaw([[0.0]], [0.5], ("a",))


def test_compare_finite_laws():
    a = FiniteLaw([[0.0], [1.0]], [0.5, 0.5], ("x",))
    b = FiniteLaw([[1.0], [0.0]], [0.5, 0.5], ("x",))
    v = compare_laws(a, b)
    assert v.equal and v.method == "closed-form" and v.statistic == 0
    c = FiniteLaw([[0.0], [1.0]], [0.4, 0.6], ("x",))
    v = compare_laws(a, c)
    assert not v.equal and v.statistic == pytest.approx(0.1)
    d = FiniteLaw([[0.0], [2.0]], [0.5, 0.5], ("x",))
    assert compare_laws(a, d).statistic == pytest.approx(0.5)


def test_compare_finite_against_gaussian():
    point = FiniteLaw([[3.0]], [1.0], ("x",))
    assert compare_laws(point, GaussianLaw([3.0], [[0.0]], ("x",))).equal
    assert not compare_laws(point, GaussianLaw([3.0], [[1e-3]], ("x",))).equal
    emp = EmpiricalLaw(np.full(500, 3.0), ("x",))
    assert compare_laws(point, emp, seed=1).method == "energy-test"


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 40), st.integers(2, 40))
def test_energy_statistic_matches_brute_force(seed, na, nb):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=na), rng.normal(0.5, 1.0, size=nb)
    _, stat = energy_test(x, y, permutations=5, seed=seed)
    z = np.concatenate([x, y])
    z = (z - z.mean()) / z.std()
    assert stat == pytest.approx(brute_energy(z[:na], z[na:]), rel=1e-9, abs=1e-12)


def test_energy_p_value_matches_brute_force_permutations():
    rng = np.random.default_rng(11)
    x, y = rng.normal(size=25), rng.normal(0.4, 1.0, size=20)
    P, seed = 60, 4
    p, obs = energy_test(x, y, permutations=P, seed=seed)
    z = np.concatenate([x, y])
    z = (z - z.mean()) / z.std()
    perm_seed = np.random.SeedSequence(seed).spawn(2)[1]
    labels = _energy_py.permutation_labels(perm_seed.generate_state(P, dtype=np.uint64), 45, 25)
    stats = np.array([brute_energy(z[row == 1], z[row == 0]) for row in labels.astype(bool)])
    eps = 1e-7 * (abs(obs) + np.abs(stats).mean()) + 1e-12
    assert p == pytest.approx((1 + np.sum(stats >= obs - eps)) / (P + 1))


def test_permutation_labels_are_balanced_and_reproducible():
    seeds = np.arange(1, 6, dtype=np.uint64)
    lab = _energy_py.permutation_labels(seeds, 30, 12)
    assert lab.shape == (5, 30) and lab.dtype == np.int8
    assert (lab.sum(axis=1) == 12).all()
    np.testing.assert_array_equal(lab, _energy_py.permutation_labels(seeds, 30, 12))
    assert len({row.tobytes() for row in lab}) == 5


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
def test_backends_agree():
    from exactsem import _energy
    seeds = np.random.SeedSequence(9).generate_state(40, dtype=np.uint64)
    np.testing.assert_array_equal(_energy.permutation_labels(seeds, 501, 200),
                                  _energy_py.permutation_labels(seeds, 501, 200))
    rng = np.random.default_rng(2)
    proj = rng.normal(size=(501, 3))
    order = np.ascontiguousarray(np.argsort(proj, axis=0, kind="stable").T)
    vals = np.ascontiguousarray(np.take_along_axis(proj.T, order, axis=1))
    labels = _energy_py.permutation_labels(seeds, 501, 200)
    np.testing.assert_allclose(_energy.permutation_energy(vals, order, labels, 200),
                               _energy_py.permutation_energy(vals, order, labels, 200),
                               rtol=1e-9)


def test_energy_test_degenerate_and_errors():
    assert energy_test(np.ones(10), np.ones(12)) == (1.0, 0.0)
    with pytest.raises(PreconditionError):
        energy_test(np.zeros((3, 2)), np.zeros((3, 1)))


def test_energy_test_deterministic():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(300, 2)), rng.normal(size=(200, 2))
    assert energy_test(x, y, seed=5) == energy_test(x, y, seed=5)


@pytest.mark.slow
def test_bernoulli_null_calibration():
    accept = 0
    for r in range(100):
        rng = np.random.default_rng([77, r])
        a = (rng.random(50_000) < 0.5).astype(float)
        b = (rng.random(50_000) < 0.5).astype(float)
        p, _ = energy_test(a, b, permutations=200, seed=r)
        accept += p > 0.01
    assert accept >= 95


def test_pure_python_switch():
    import os
    import subprocess
    import sys
    env = dict(os.environ, EXACTSEM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from exactsem import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
