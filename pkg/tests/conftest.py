from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pqvar.domain import build_mesh
from pqvar.experiment import load_problem, solve_tasks

settings.register_profile(
    "pqvar",
    max_examples=25,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("pqvar")

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"


@pytest.fixture(scope="session")
def reference():
    """Reference problem with its eigenvalue thresholds computed once."""
    lp = load_problem(CONFIGS / "reference.json")
    return lp, lp.thresholds()


@pytest.fixture(scope="session")
def ref_mesh(reference):
    return reference[0].mesh


@pytest.fixture(scope="session")
def below_lam2(reference):
    """Positive, negative and auxiliary solutions at lam = lam1_q + 1."""
    lp, th = reference
    out, sols, pr = solve_tasks(lp, th, th.lam1_q + 1.0, ["positive", "negative", "auxiliary"])
    return out, sols, pr


@pytest.fixture(scope="session")
def above_lam2(reference):
    """Full chain up to the nodal solution at lam = lam2_q + 1."""
    lp, th = reference
    out, sols, pr = solve_tasks(lp, th, th.lam2_q + 1.0, ["nodal"])
    return out, sols, pr


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def small_mesh_1d():
    return build_mesh(1, [0.0, np.pi], 32)


@pytest.fixture(scope="session")
def small_mesh_2d():
    return build_mesh(2, [[0.0, 1.0], [0.0, 1.5]], 6)


def make_zoo(mesh, seed=0):
    """One FunctionalSpec per kind on ``mesh`` with valid anchors and a varying weight."""
    from pqvar.domain import DiscreteFunction, ScalarField
    from pqvar.energy import KINDS, FunctionalSpec
    from pqvar.model import ProblemSpec, builtin_nonlinearity

    rng = np.random.default_rng(seed)
    f = builtin_nonlinearity("resonant_power", {"mu": 1.0, "c": 1.0, "tau": 2.5}, p=3.0, q=2.0)
    pr = ProblemSpec(p=3.0, q=2.0, a1=ScalarField.constant(1.0),
                     a2=ScalarField.family("affine", value=1.0, slope=(0.3, 0.1)), lam=3.0, f=f)
    up = DiscreteFunction.from_interior(mesh, 1.0 + rng.random(mesh.num_nodes))
    lo = DiscreteFunction.from_interior(mesh, -1.0 - rng.random(mesh.num_nodes))
    zoo = {}
    for kind in KINDS:
        kw = {}
        if kind in ("psi_aux_plus", "beta_plus"):
            kw = dict(eps=0.5, c7=1.0, upper=up)
        elif kind.startswith("psihat"):
            kw = dict(upper=up, lower=lo)
        elif kind == "rayleigh_numerator":
            kw = dict(r=2.5)
        zoo[kind] = FunctionalSpec(kind, pr, mesh, **kw)
    return zoo


def fd_check(spec, n_points=20, seed=1):
    """Worst relative error of central differences against the analytic directional derivative."""
    mesh = spec.mesh
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        u = rng.standard_normal(mesh.num_nodes) * 2.0
        u[mesh.boundary_mask] = 0.0
        d = rng.standard_normal(mesh.num_nodes)
        d[mesh.boundary_mask] = 0.0
        h = 1e-6 * (1.0 + np.abs(u).max())
        fd = (spec.value_and_grad(u + h * d).value - spec.value_and_grad(u - h * d).value) / (2 * h)
        an = spec.value_and_grad(u).gradient @ d
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-12))
    return worst


def smooth_positive_pair(mesh, rng, close=False):
    """Two interior-positive nodal vectors ``s * sin-bump * exp(g)`` with smooth random ``g``."""
    x = mesh.nodes
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    t = (x - lo) / span
    bump = np.prod(np.sin(np.pi * t), axis=1)

    def g():
        out = np.zeros(mesh.num_nodes)
        for k in range(1, 5):
            out += rng.normal(0, 0.5 / k) * np.prod(np.cos(k * np.pi * t + rng.uniform(0, np.pi)), axis=1)
        return out

    u = rng.uniform(0.2, 3.0) * bump * np.exp(g())
    w = u * np.exp(1e-3 * g()) if close else rng.uniform(0.2, 3.0) * bump * np.exp(g())
    u[mesh.boundary_mask] = 0.0
    w[mesh.boundary_mask] = 0.0
    return u, w
