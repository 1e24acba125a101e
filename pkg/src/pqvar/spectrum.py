"""Principal and second variational eigenvalues of the weighted r-Laplacian.

Both are computed on the discrete L^r unit sphere.  The principal pair is the
minimizer of the Rayleigh quotient; the second value is the minimax over paths
joining the two principal eigenfunctions, located with a climbing string.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .domain import ONE, DiscreteFunction, Mesh, ScalarField, element_weight
from .energy import _principal, principal_hessian


class ConvergenceError(RuntimeError):
    """Iteration budget exhausted; ``partial`` carries the last iterate."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True, eq=False)
class EigenPair:
    lambda_hat: float
    eigenfunction: DiscreteFunction
    r: float
    a: ScalarField
    residual_norm: float
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"r": self.r, "lambda_hat": self.lambda_hat, "residual": self.residual_norm}


@dataclass(frozen=True, eq=False)
class Path:
    knots: list
    energies: np.ndarray
    r: float

    def __len__(self) -> int:
        return len(self.knots)


@dataclass(frozen=True, eq=False)
class SecondEigenvalue:
    """Result of the path minimax.  Unpacks as ``(lambda_hat_2, path)``."""

    lambda_hat_2: float
    path: Path
    saddle: DiscreteFunction
    saddle_index: int
    residual_norm: float
    dense_max: float
    linear_oracle: float | None
    iterations: int
    notes: list = field(default_factory=list)

    def __iter__(self):
        yield self.lambda_hat_2
        yield self.path


class InteriorSolver:
    """Sparse LU of a nodal matrix restricted to interior nodes."""

    def __init__(self, mesh: Mesh, H: sp.spmatrix):
        self.mesh = mesh
        self.idx = mesh.interior
        self.lu = splu(sp.csc_matrix(H[self.idx][:, self.idx]))

    def __call__(self, rhs: np.ndarray) -> np.ndarray:
        out = np.zeros(self.mesh.num_nodes)
        out[self.idx] = self.lu.solve(rhs[self.idx])
        return out


class Rayleigh:
    """``R(u) = int a|Du|^r / int |u|^r`` on a fixed mesh."""

    def __init__(self, mesh: Mesh, r: float, a: ScalarField = ONE):
        if r <= 1.0:
            raise ValueError(f"exponent must exceed 1, got {r}")
        self.mesh, self.r, self.a = mesh, float(r), a
        self.a_e = element_weight(mesh, a)
        self.terms = [(self.a_e, self.r)]

    def norm(self, values: np.ndarray) -> float:
        x = self.mesh.at_qp(values)
        return self.mesh.integrate_qp(np.abs(x) ** self.r) ** (1.0 / self.r)

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return values / self.norm(values)

    def parts(self, values: np.ndarray):
        """``(A(u), B(u), int a|Du|^r, int |u|^r)`` as nodal vectors / scalars."""
        mesh, r = self.mesh, self.r
        P, A = _principal(mesh, values, self.terms)
        x = mesh.at_qp(values)
        N = mesh.integrate_qp(np.abs(x) ** r)
        B = mesh.load_vector(np.sign(x) * np.abs(x) ** (r - 1.0))
        A = np.asarray(A, dtype=float)
        A[mesh.boundary_mask] = 0.0
        B[mesh.boundary_mask] = 0.0
        return A, B, r * P, N

    def value_and_grad(self, values: np.ndarray):
        A, B, P, N = self.parts(values)
        R = P / N
        return R, self.r * (A - R * B) / N

    def residual(self, values: np.ndarray, lam: float | None = None) -> float:
        """Max-norm of the weak residual ``A(u) - lam B(u)`` of the normalized ``u``."""
        u = self.normalize(values)
        A, B, P, N = self.parts(u)
        lam = P / N if lam is None else lam
        return float(np.max(np.abs((A - lam * B)[self.mesh.interior])))

    def preconditioner(self, values: np.ndarray) -> InteriorSolver:
        return InteriorSolver(self.mesh, self.r * principal_hessian(self.mesh, values, self.terms))


def armijo(fun, project, u, E, g, d, *, t0=1.0, c=1e-4, rho=0.5, max_bt=50):
    """Backtracking on ``fun(project(u + t d))``; ``None`` if ``d`` is not a descent direction
    or no step passes.  A round-off slack lets steps through once ``E`` stagnates."""
    slope = float(g @ d)
    if slope >= 0.0:
        return None
    t = t0
    for _ in range(max_bt):
        v = project(u + t * d)
        Ev = fun(v)[0]
        if Ev <= E + c * t * slope + 1e-13 * (1.0 + abs(E)):
            return v, Ev, t
        t *= rho
    return None


def _interior_constant(mesh: Mesh) -> np.ndarray:
    u = np.ones(mesh.num_nodes)
    u[mesh.boundary_mask] = 0.0
    return u


def principal_eigenpair(mesh: Mesh, r: float, a: ScalarField = ONE, tol: float = 1e-9,
                        max_iters: int = 1000) -> EigenPair:
    """Minimize the Rayleigh quotient from the interior-constant start.

    Each step is a variable-metric descent step preconditioned by the Hessian of
    the numerator; for ``r = 2`` this is inverse iteration.
    """
    rq = Rayleigh(mesh, r, a)
    u = rq.normalize(_interior_constant(mesh))
    R, g = rq.value_and_grad(u)
    for it in range(max_iters):
        res = rq.residual(u, R)
        if res <= tol:
            break
        d = -rq.preconditioner(u)(g)
        step = armijo(rq.value_and_grad, rq.normalize, u, R, g, d)
        if step is None:
            if res <= 10.0 * tol:
                break
            raise ConvergenceError(f"line search stalled at residual {res:.3e}",
                                   EigenPair(R, DiscreteFunction(mesh, u), r, a, res, it))
        u, R, _ = step
        R, g = rq.value_and_grad(u)
    else:
        res = rq.residual(u, R)
        if res > tol:
            raise ConvergenceError(f"no convergence in {max_iters} iterations (residual {res:.3e})",
                                   EigenPair(R, DiscreteFunction(mesh, u), r, a, res, max_iters))
        it = max_iters
    u = rq.normalize(np.abs(u))
    R = rq.value_and_grad(u)[0]
    return EigenPair(float(R), DiscreteFunction(mesh, u), float(r), a, rq.residual(u, R), it)


def eigen_residual(pair: EigenPair) -> float:
    """Max-norm over interior basis functions of the weak eigen-residual."""
    u = pair.eigenfunction
    return Rayleigh(u.mesh, pair.r, pair.a).residual(u.values, pair.lambda_hat)


def linear_eigenpairs(mesh: Mesh, a: ScalarField = ONE, k: int = 2):
    """Lowest ``k`` eigenpairs of ``-div(a D u) = lam u`` (dense generalized solve).

    Eigenvectors are M-orthonormal nodal vectors with a positive first entry sum.
    """
    idx = mesh.interior
    K = mesh.stiffness_matrix(element_weight(mesh, a))[idx][:, idx].toarray()
    M = mesh.mass_matrix()[idx][:, idx].toarray()
    w, V = la.eigh(K, M, subset_by_index=[0, k - 1])
    vecs = np.zeros((k, mesh.num_nodes))
    vecs[:, idx] = V.T
    for i in range(k):
        j = np.argmax(np.abs(vecs[i]))
        if vecs[i, j] < 0:
            vecs[i] *= -1.0
    return w, vecs


# -- path minimax ------------------------------------------------------------

def _arclength(seg: np.ndarray, M: sp.spmatrix) -> np.ndarray:
    diffs = np.diff(seg, axis=0)
    lens = np.sqrt(np.maximum(np.einsum("ij,ij->i", diffs, (M @ diffs.T).T), 0.0))
    return np.concatenate([[0.0], np.cumsum(lens)])


def respace(knots: np.ndarray, M: sp.spmatrix, pivot: int, project) -> np.ndarray:
    """Equalize L2 arclength on each side of ``pivot``, keeping it and the ends fixed."""
    def side(seg):
        s = _arclength(seg, M)
        if s[-1] <= 0.0 or len(seg) < 3:
            return seg
        target = np.linspace(0.0, s[-1], len(seg))
        out = seg.copy()
        for k in range(1, len(seg) - 1):
            j = min(np.searchsorted(s, target[k], side="right") - 1, len(seg) - 2)
            w = (target[k] - s[j]) / max(s[j + 1] - s[j], 1e-300)
            out[k] = project((1.0 - w) * seg[j] + w * seg[j + 1])
        return out

    left = side(knots[: pivot + 1])
    right = side(knots[pivot:])
    return np.vstack([left[:-1], right])


def dense_max(fun, knots: np.ndarray, project, sub: int = 8) -> float:
    """Max of ``fun`` over ``sub`` projected points per segment of the polygonal path."""
    best = -np.inf
    for k in range(len(knots) - 1):
        for s in np.linspace(0.0, 1.0, sub + 1)[:-1]:
            v = (1.0 - s) * knots[k] + s * knots[k + 1]
            try:
                best = max(best, fun(project(v))[0])
            except (FloatingPointError, ZeroDivisionError):
                continue
    return float(max(best, fun(knots[-1])[0]))


@dataclass
class StringResult:
    knots: np.ndarray
    energies: np.ndarray
    climber: int
    residual: float
    iterations: int
    converged: bool
    excursions: int = 0
    trace: list = field(default_factory=list)


def climbing_string(fun, knots: np.ndarray, M: sp.spmatrix, *, precond, project, residual,
                    tol: float, max_iters: int = 3000, climb_t: float = 0.3,
                    relax_all: bool = True, on_project=None) -> StringResult:
    """Minimax over a polygonal path with fixed end points.

    ``fun(v) -> (E, g)``; ``precond(v)`` returns a solver for the metric;
    ``project`` maps back to the admissible set (sphere, order interval);
    ``residual(v)`` measures criticality of the climbing knot.  The top interior
    knot climbs (its tangential component is reversed) while the others descend
    perpendicular to the path; knots are re-spaced by L2 arclength after each
    sweep.  ``climb_t`` halves whenever the climber's residual jumps up.
    """
    knots = np.array(knots, dtype=float)
    K = len(knots) - 1
    step = np.full(K + 1, 1.0)
    trace: list = []
    res = prev = np.inf
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        vals = np.array([fun(kn)[0] for kn in knots])
        c = int(np.argmax(vals[1:-1])) + 1
        for i in range(1, K):
            if i != c and not relax_all:
                continue
            E, g = fun(knots[i])
            d = -precond(knots[i])(g)
            tau = knots[i + 1] - knots[i - 1]
            nt = np.sqrt(tau @ (M @ tau))
            along = 0.0
            if nt > 0.0:
                tau = tau / nt
                along = tau @ (M @ d)
            if i == c:
                knots[i] = project(knots[i] + climb_t * (d - 2.0 * along * tau))
            else:
                out = armijo(fun, project, knots[i], E, g, d - along * tau, t0=min(1.0, 2.0 * step[i]))
                if out is not None:
                    knots[i], _, step[i] = out
        knots = respace(knots, M, c, project)
        res = residual(knots[c])
        if res > 3.0 * prev:
            climb_t = max(0.5 * climb_t, 1e-3)
        prev = res
        trace.append((float(vals.max()), c, res, climb_t))
        if res <= tol:
            converged = True
            break
    vals = np.array([fun(kn)[0] for kn in knots])
    c = int(np.argmax(vals[1:-1])) + 1
    return StringResult(knots, vals, c, residual(knots[c]), it, converged, trace=trace)


def second_eigenvalue(mesh: Mesh, r: float, a: ScalarField = ONE, path_knots: int = 21,
                      tol: float = 1e-8, principal: EigenPair | None = None,
                      max_iters: int = 3000, relax_all: bool = True,
                      climb_t: float = 0.3) -> SecondEigenvalue:
    """Minimax over discrete paths on the L^r sphere from ``-u1`` to ``u1``.

    The path starts on the great circle through ``u1`` and the second linear
    eigenvector and is relaxed by :func:`climbing_string`.  The climbing knot
    converges to a sign-changing eigenfunction whose value is the estimate.
    """
    if path_knots < 3:
        raise ValueError(f"path_knots must be at least 3, got {path_knots}")
    rq = Rayleigh(mesh, r, a)
    if principal is None:
        principal = principal_eigenpair(mesh, r, a)
    u1 = principal.eigenfunction.values
    M = mesh.mass_matrix()
    lin, vecs = linear_eigenpairs(mesh, a, 2)
    w = vecs[1] - (vecs[1] @ (M @ u1)) / (u1 @ (M @ u1)) * u1
    w = w * np.sqrt(u1 @ (M @ u1)) / np.sqrt(w @ (M @ w))
    K = path_knots - 1
    thetas = np.pi * (1.0 - np.arange(K + 1) / K)
    knots = np.array([rq.normalize(np.cos(t) * u1 + np.sin(t) * w) for t in thetas])
    knots[0], knots[-1] = -u1, u1

    out = climbing_string(rq.value_and_grad, knots, M, precond=rq.preconditioner,
                          project=rq.normalize, residual=rq.residual, tol=tol,
                          max_iters=max_iters, climb_t=climb_t, relax_all=relax_all)
    notes: list[str] = []
    if not out.converged:
        notes.append(f"iteration budget exhausted, saddle residual {out.residual:.3e}")
        if out.residual > 1e3 * tol:
            raise ConvergenceError(f"path minimax did not converge (residual {out.residual:.3e})", out)
    knots = out.knots
    knots[0], knots[-1] = -u1, u1
    path = Path([DiscreteFunction(mesh, kn) for kn in knots], out.energies, float(r))
    c = out.climber
    lam2 = float(out.energies[c])
    return SecondEigenvalue(
        lambda_hat_2=lam2,
        path=path,
        saddle=path.knots[c],
        saddle_index=c,
        residual_norm=rq.residual(knots[c], lam2),
        dense_max=dense_max(rq.value_and_grad, knots, rq.normalize),
        linear_oracle=float(lin[1]) if r == 2.0 else None,
        iterations=out.iterations,
        notes=notes,
    )
