import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pqvar.domain import ONE, DiscreteFunction, ScalarField, build_mesh
from pqvar.energy import FunctionalSpec
from pqvar.model import ProblemSpec, builtin_nonlinearity
from pqvar.solve import (
    SolverParams,
    classify,
    constant_sign_solution,
    extremal_solution,
    minimize,
    mountain_pass_nodal,
    nonexistence_scan,
    solve_auxiliary,
)
from pqvar.spectrum import principal_eigenpair

MESH = build_mesh(1, [0.0, np.pi], 64)
LAM1_P = principal_eigenpair(MESH, 3.0).lambda_hat
Q_PAIR = principal_eigenpair(MESH, 2.0)


def resonant_problem(lam, mesh_lam1_p=LAM1_P):
    f = builtin_nonlinearity("resonant_power", {"mu": mesh_lam1_p, "c": 1.0, "tau": 2.5}, p=3.0, q=2.0)
    return ProblemSpec(p=3.0, q=2.0, a1=ONE, a2=ONE, lam=lam, f=f)


# -- classification and parameters --------------------------------------------

def test_classify_examples():
    mesh = build_mesh(1, [0.0, 4.0], 4)
    assert classify(DiscreteFunction(mesh, [0, 1e-7, -1e-7, 0, 0])) == "trivial"
    assert classify(DiscreteFunction(mesh, [0, 1.0, 2.0, 1e-8, 0])) == "positive"
    assert classify(DiscreteFunction(mesh, [0, -1.0, -2.0, 0.0, 0])) == "negative"
    assert classify(DiscreteFunction(mesh, [0, -1.0, 2.0, 0.0, 0])) == "nodal"
    # tiny opposite-sign values below sign_tol do not make a function nodal
    assert classify(DiscreteFunction(mesh, [0, -1e-9, 2.0, 0.0, 0])) == "positive"


@pytest.mark.parametrize("kw", [dict(c=0.0), dict(rho=1.0), dict(grad_tol=-1.0), dict(max_iters=0),
                                dict(preconditioner="magic"), dict(trivial_tol=0.0)])
def test_solver_params_validation(kw):
    with pytest.raises(ValueError):
        SolverParams(**kw)


def test_default_tolerance_by_dimension():
    p = SolverParams()
    assert p.tol(MESH) == 1e-8
    assert p.tol(build_mesh(2, [[0, 1], [0, 1]], 4)) == 1e-6
    assert SolverParams(grad_tol=1e-5).tol(MESH) == 1e-5


# -- constant-sign minimization ---------------------------------------------

def test_constant_sign_pair_above_threshold():
    pr = resonant_problem(Q_PAIR.lambda_hat + 1.0)
    pos = constant_sign_solution(pr, MESH, 1, q_pair=Q_PAIR)
    neg = constant_sign_solution(pr, MESH, -1, q_pair=Q_PAIR)
    assert pos.converged and neg.converged
    assert pos.classification == "positive" and neg.classification == "negative"
    assert pos.energy < 0 and neg.energy < 0
    assert pos.grad_norm <= SolverParams().tol(MESH)
    # odd reaction and mirrored starts give mirrored solutions
    assert np.max(np.abs(pos.solution.values + neg.solution.values)) <= 1e-8
    energies = [e for e, _ in pos.trace]
    assert np.all(np.diff(energies) <= 1e-13 * (1 + np.abs(energies[:-1])))


def test_zero_start_is_already_critical():
    spec = FunctionalSpec("phi_plus", resonant_problem(3.0), MESH)
    rep = minimize(spec, DiscreteFunction.zeros(MESH))
    assert rep.converged and rep.iterations == 0
    assert rep.energy == 0.0 and rep.classification == "trivial"


@settings(max_examples=8)
@given(seed=st.integers(0, 2**32 - 1))
def test_positive_truncation_yields_nonnegative_limit(seed):
    rng = np.random.default_rng(seed)
    spec = FunctionalSpec("phi_plus", resonant_problem(2.5), MESH)
    start = DiscreteFunction.from_interior(MESH, rng.normal(0.0, 1.0, MESH.num_nodes))
    rep = minimize(spec, start)
    assert rep.converged
    assert np.max(np.maximum(-rep.solution.values, 0.0)) <= 1e-6


def test_iteration_budget_flags_nonconvergence():
    spec = FunctionalSpec("phi_plus", resonant_problem(3.0), MESH)
    rep = minimize(spec, Q_PAIR.eigenfunction * 0.1, SolverParams(max_iters=1, preconditioner="none"))
    assert not rep.converged
    assert any("budget" in n for n in rep.notes)


def test_alternative_metrics():
    pr = resonant_problem(Q_PAIR.lambda_hat + 1.0)
    ref = constant_sign_solution(pr, MESH, 1, q_pair=Q_PAIR)
    # a fixed Laplacian metric stalls near 1e-6 where Armijo can no longer resolve energy decrease
    lap = constant_sign_solution(pr, MESH, 1, SolverParams(preconditioner="laplacian", grad_tol=1e-6),
                                 q_pair=Q_PAIR, tol_factor=1.0)
    assert lap.converged
    assert np.max(np.abs(lap.solution.values - ref.solution.values)) <= 1e-5 * ref.solution.sup_norm()
    slow = constant_sign_solution(pr, MESH, 1, SolverParams(preconditioner="lumped_mass", max_iters=300),
                                  q_pair=Q_PAIR)
    energies = np.array([e for e, _ in slow.trace])
    assert np.all(np.diff(energies) <= 1e-13 * (1 + np.abs(energies[:-1])))
    assert ref.energy <= energies[-1] < energies[0]


def test_two_dimensional_positive_solution():
    mesh = build_mesh(2, [[0.0, 1.0], [0.0, 1.0]], 10)
    lam1_p = principal_eigenpair(mesh, 3.0).lambda_hat
    q_pair = principal_eigenpair(mesh, 2.0)
    f = builtin_nonlinearity("resonant_power", {"mu": lam1_p, "c": 20.0, "tau": 2.5}, p=3.0, q=2.0)
    pr = ProblemSpec(p=3.0, q=2.0, a1=ONE, a2=ScalarField.family("affine", value=1.0, slope=(0.5, 0.0)),
                     lam=q_pair.lambda_hat + 5.0, f=f)
    rep = constant_sign_solution(pr, mesh, 1, q_pair=principal_eigenpair(mesh, 2.0, pr.a2))
    assert rep.converged and rep.classification == "positive" and rep.energy < 0


# -- auxiliary problem -------------------------------------------------------

def test_auxiliary_unique_and_odd():
    pr = resonant_problem(Q_PAIR.lambda_hat + 1.0)
    pos, verdict = solve_auxiliary(pr, MESH, 0.5, 1.0, n_starts=8, lam1_q=Q_PAIR.lambda_hat)
    assert verdict.verdict == "pass" and verdict.n_converged == 8
    assert verdict.max_rel_diff <= 1e-6
    assert np.all(pos.solution.values[MESH.interior] > 0)
    neg, _ = solve_auxiliary(pr, MESH, 0.5, 1.0, n_starts=2, lam1_q=Q_PAIR.lambda_hat, sign=-1)
    assert np.max(np.abs(neg.solution.values + pos.solution.values)) <= 1e-10


def test_auxiliary_preconditions():
    lam1 = Q_PAIR.lambda_hat
    with pytest.raises(ValueError, match="lam1_q"):
        solve_auxiliary(resonant_problem(0.5 * lam1), MESH, 0.1, 1.0, lam1_q=lam1)
    with pytest.raises(ValueError, match="eps"):
        solve_auxiliary(resonant_problem(lam1 + 1.0), MESH, 1.5, 1.0, lam1_q=lam1)


# -- extremal and nodal solutions on the reference problem --------------------

def test_extremal_ordering_chain(above_lam2):
    out, sols, _ = above_lam2
    ext = out["extremal"]
    assert ext["u_star"]["ordering"] and ext["v_star"]["ordering"]
    u_star, v_star = sols["u_star"].values, sols["v_star"].values
    u_seed, v_seed = sols["positive"].values, sols["negative"].values
    assert np.all(u_star <= u_seed + 1e-8) and np.all(v_star >= v_seed - 1e-8)
    assert np.all(u_star[sols["u_star"].mesh.interior] > 0)


def test_extremal_from_minimal_seed_returns_seed(reference, above_lam2):
    lp, th = reference
    out, sols, pr = above_lam2
    u_star = sols["u_star"]
    eps, c7 = out["auxiliary"]["eps"], out["auxiliary"]["c7"]
    again = extremal_solution(pr, lp.mesh, u_star, eps, c7, lam1_q=th.lam1_q)
    assert again.flags["ordering"]
    assert np.max(np.abs(again.solution.values - u_star.values)) <= 1e-6 * u_star.sup_norm()


def test_nodal_solution_changes_sign_inside_interval(above_lam2):
    out, sols, _ = above_lam2
    nodal = out["nodal"]
    assert nodal["found"] and nodal["classification"] == "nodal"
    flags = nodal["flags"]
    assert flags["ring"]["ok"] and flags["ordering"]
    y, u_star, v_star = sols["nodal"].values, sols["u_star"].values, sols["v_star"].values
    assert np.all(v_star - 1e-8 <= y) and np.all(y <= u_star + 1e-8)
    tol = 1e-6 * np.abs(y).max()
    assert y.max() > tol and y.min() < -tol
    lo, hi = flags["endpoint_energies"]
    assert max(lo, hi) < flags["ring"]["ring_min"]


def test_mountain_pass_rejects_empty_interval():
    zero = DiscreteFunction.zeros(MESH)
    with pytest.raises(ValueError, match="empty"):
        mountain_pass_nodal(resonant_problem(5.0), MESH, zero, zero)
    one = DiscreteFunction.from_interior(MESH, np.ones(MESH.num_nodes))
    with pytest.raises(ValueError, match="anchor"):
        mountain_pass_nodal(resonant_problem(5.0), MESH, -1.0 * one, one)


# -- nonexistence --------------------------------------------------------------

def test_nonexistence_below_threshold_and_control():
    lam1 = Q_PAIR.lambda_hat
    scan = nonexistence_scan(resonant_problem(0.5 * lam1), MESH, n_starts=16, q_pair=Q_PAIR)
    assert scan.verdict == "pass"
    assert all(r.solution.sup_norm() <= 1e-6 for r in scan.reports)
    control = nonexistence_scan(resonant_problem(lam1 + 1.0), MESH, n_starts=4, q_pair=Q_PAIR)
    assert control.verdict == "fail" and control.counterexamples


def test_nonexistence_is_seed_deterministic():
    pr = resonant_problem(0.5 * Q_PAIR.lambda_hat)
    a = nonexistence_scan(pr, MESH, SolverParams(seed=3), n_starts=6, q_pair=Q_PAIR)
    b = nonexistence_scan(pr, MESH, dataclasses.replace(SolverParams(seed=3), threads=3), n_starts=6,
                          q_pair=Q_PAIR)
    for ra, rb in zip(a.reports, b.reports):
        assert np.array_equal(ra.solution.values, rb.solution.values)
