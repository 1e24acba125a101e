import numpy as np
import pytest

from pqvar.domain import ONE, ScalarField, build_mesh
from pqvar.model import ProblemSpec, builtin_nonlinearity, check_hypotheses, sample_grid

Z = np.zeros((1, 1))


def resonant(mu=1.0, c=1.0, tau=2.5, p=3.0, q=2.0):
    return builtin_nonlinearity("resonant_power", {"mu": mu, "c": c, "tau": tau}, p=p, q=q)


def problem(f, a1=ONE, a2=ONE, lam=2.0, c1=None):
    return ProblemSpec(p=3.0, q=2.0, a1=a1, a2=a2, lam=lam, f=f, c1=c1)


def test_resonant_growth_identity():
    f = resonant()
    x = np.array([2.0])
    val = float(f.f(Z, x)[0] * 2.0 - 3.0 * f.F(Z, x)[0])
    assert val == pytest.approx(1.1313708498984762, rel=1e-14)
    assert f.f(Z, np.array([0.0]))[0] == 0.0


@pytest.mark.parametrize("name,params", [
    ("resonant_power", {"mu": 1.3, "c": 0.7, "tau": 2.2}),
    ("subcritical_power", {"c": 2.0, "s": 2.6}),
    ("zero", {}),
])
def test_primitive_matches_reaction(name, params):
    f = builtin_nonlinearity(name, params, p=3.0, q=2.0,
                             weight=ScalarField.family("affine", value=1.0, slope=[0.5]))
    x = np.concatenate([-np.logspace(-1, 1, 40), np.logspace(-1, 1, 40)])
    z = np.full((x.size, 1), 0.7)
    h = 1e-5 * np.abs(x)
    fd = (f.F(z, x + h) - f.F(z, x - h)) / (2 * h)
    fv = f.f(z, x)
    assert np.all(np.abs(fd - fv) <= 1e-6 * np.maximum(np.abs(fv), 1e-12) + 1e-12)


def test_resonance_gap_positive_and_increasing():
    mu = 0.9123754211456594
    f = resonant(mu=mu)
    x = np.logspace(-2, 2, 200)
    gap = mu * x ** 3 - 3.0 * f.F(np.zeros((x.size, 1)), x)
    assert np.all(gap > 0) and np.all(np.diff(gap) > 0)
    assert np.allclose(gap, 3.0 * x ** 2.5 / 2.5, rtol=1e-12)


@pytest.mark.parametrize("params,match", [
    ({"mu": 1.0, "c": 1.0, "tau": 3.5}, "tau"),
    ({"mu": 1.0, "c": 1.0, "tau": 1.5}, "tau"),
    ({"mu": 1.0, "c": 0.0, "tau": 2.5}, "c"),
])
def test_resonant_parameter_errors(params, match):
    with pytest.raises(ValueError, match=match):
        builtin_nonlinearity("resonant_power", params, p=3.0, q=2.0)


def test_unknown_family_and_bad_exponents():
    with pytest.raises(ValueError, match="unknown"):
        builtin_nonlinearity("cubic", {}, p=3.0, q=2.0)
    with pytest.raises(ValueError, match="q"):
        ProblemSpec(p=2.0, q=3.0, a1=ONE, a2=ONE, lam=1.0, f=resonant())


def test_zero_family_fails_h1v_at_one():
    f = builtin_nonlinearity("zero", {}, p=3.0, q=2.0)
    rep = check_hypotheses(problem(f))
    chk = rep.checks["H1(v)"]
    assert chk.verdict == "fail"
    assert chk.witness["x"] == 1.0


def test_low_weight_fails_h0():
    rep = check_hypotheses(problem(resonant(), a1=ScalarField.constant(0.5), c1=1.0))
    assert rep.verdict("H0") == "fail"
    assert rep.checks["H0"].margin == pytest.approx(-0.5)


def test_resonant_report_at_principal_eigenvalue():
    lam1_p = 0.9123754211456594
    mesh = build_mesh(1, [0.0, np.pi], 16)
    rep = check_hypotheses(problem(resonant(mu=lam1_p)), mesh, lam1_p=lam1_p)
    for key in ("H0", "H1(f0)", "H1(i)", "H1(ii)", "H1(iii)", "H1(iv)", "H1''(vi)"):
        assert rep.verdict(key) == "pass", key
    # sampled ratio f/|x|^(p-2)x peaks at mu - c X^(tau-p) on the box |x| <= X = 100
    assert rep.checks["H1(ii)"].margin == pytest.approx(100.0 ** -0.5, rel=1e-9)
    # f x is negative for large |x| (resonance from below), so the lower bound clause fails
    assert rep.verdict("H1(v)") == "fail"


def test_subcritical_violates_growth_and_upper_bound():
    f = builtin_nonlinearity("subcritical_power", {"c": 1.0, "s": 2.5}, p=3.0, q=2.0)
    rep = check_hypotheses(problem(f), lam1_p=0.9123754211456594)
    assert rep.verdict("H1(iii)") == "fail"
    assert rep.verdict("H1''(vi)") == "fail"


def test_h0_inconclusive_for_tabulated_without_mesh():
    mesh = build_mesh(1, [0.0, 1.0], 4)
    a = ScalarField.tabulated(mesh, np.ones(mesh.num_nodes))
    rep = check_hypotheses(problem(resonant(), a1=a))
    assert rep.verdict("H0") == "inconclusive"


def test_sample_grid_symmetric_with_unit():
    xs = sample_grid(100.0)
    assert np.allclose(xs, -xs[::-1])
    assert 1.0 in xs and -1.0 in xs and xs.max() == pytest.approx(100.0)


def test_reflection_is_odd_mirror():
    f = builtin_nonlinearity("subcritical_power", {"c": 1.5, "s": 2.4}, p=3.0, q=2.0)
    g = f.reflect()
    x = np.linspace(-3, 3, 13)
    z = np.zeros((x.size, 1))
    assert np.allclose(g.f(z, x), -f.f(z, -x))
    assert np.allclose(g.F(z, x), f.F(z, -x))
    assert np.allclose(g.reflect().f(z, x), f.f(z, x))
