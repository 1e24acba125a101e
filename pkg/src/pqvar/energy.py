"""Energies of the problem and its truncations, with exact discrete gradients.

Every functional has the form

    (1/p) int a1 |Du|^p + (1/q) int a2 |Du|^q - int H(z, u)

and differs only in the primitive ``H`` of its (possibly truncated) reaction.
Truncated primitives are spliced in closed form from the primitive of the
untruncated reaction, so values and gradients stay consistent to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .domain import ONE, DiscreteFunction, Mesh, ScalarField, element_weight
from .model import ProblemSpec, _spow

KINDS = (
    "phi",
    "phi_plus",
    "phi_minus",
    "psi_aux_plus",
    "beta_plus",
    "psihat",
    "psihat_plus",
    "psihat_minus",
    "rayleigh_numerator",
)
TRUNCATIONS = ("k_plus", "mu", "mu_plus", "mu_minus")


@dataclass(frozen=True)
class EnergyGradient:
    value: float
    gradient: np.ndarray
    excursions: int = 0


def _principal(mesh: Mesh, values: np.ndarray, terms) -> tuple[float, np.ndarray]:
    """``sum (1/r) int a |Du|^r`` and its nodal gradient for ``terms = [(a_e, r), ...]``."""
    g = mesh.gradients(values)
    norm = np.sqrt(np.sum(g * g, axis=1))
    nz = norm > 0.0
    value = 0.0
    coef = np.zeros_like(norm)
    for a_e, r in terms:
        value += float(a_e @ norm ** r) / r
        coef[nz] += a_e[nz] * norm[nz] ** (r - 2.0)
    grad = sum(G.T @ (coef * g[:, d]) for d, G in enumerate(mesh.grad_ops))
    return value, grad


def principal_hessian(mesh: Mesh, values: np.ndarray, terms, rel_delta: float = 1e-3,
                      rel_delta_sub: float = 1e-8) -> sp.csr_matrix:
    """Hessian of ``sum (1/r) int a |Du|^r`` with ``|Du|`` regularised away from 0.

    Used as a variable-metric preconditioner; it is symmetric positive definite
    on the interior nodes for every ``r > 1``.  Terms with ``r >= 2`` degenerate
    where ``Du = 0`` and get the coarse shift ``rel_delta``; terms with ``r < 2``
    blow up there instead and get the fine shift ``rel_delta_sub``.
    """
    g = mesh.gradients(values)
    n2 = np.sum(g * g, axis=1)
    gmax = float(np.sqrt(n2.max())) if n2.size else 0.0

    def reg(r):
        rel = rel_delta if r >= 2.0 else rel_delta_sub
        delta = rel * gmax if gmax > 0.0 else 1.0
        return n2 + delta * delta

    if mesh.dim == 1:
        w = sum(a_e * (r - 1.0) * reg(r) ** ((r - 2.0) / 2.0) for a_e, r in terms)
        return mesh.stiffness_matrix(w)
    eye = np.eye(mesh.dim)[None]
    W = 0.0
    for a_e, r in terms:
        rg = reg(r)
        outer = g[:, :, None] * g[:, None, :] / rg[:, None, None]
        W = W + (a_e * rg ** ((r - 2.0) / 2.0))[:, None, None] * (eye + (r - 2.0) * outer)
    return mesh.stiffness_matrix(W)


@dataclass(frozen=True, eq=False)
class FunctionalSpec:
    """Which energy to evaluate, on which mesh, with which truncation anchors.

    ``upper`` is the anchor ``u`` of the single-sided truncation and the upper
    end ``u*`` of the order interval; ``lower`` is ``v*``.  ``eps``/``c7`` enter
    the auxiliary reaction ``(lam - eps)|x|^(q-2)x - c7|x|^(p-2)x``.
    ``r``/``weight`` select the Rayleigh numerator (defaults ``q``, ``a2``).
    """

    kind: str
    problem: ProblemSpec
    mesh: Mesh
    upper: DiscreteFunction | None = None
    lower: DiscreteFunction | None = None
    eps: float | None = None
    c7: float | None = None
    lam1_q: float | None = None
    r: float | None = None
    weight: ScalarField | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        for anchor in (self.upper, self.lower):
            if anchor is not None and anchor.mesh is not self.mesh:
                raise ValueError("anchor lives on a different mesh")
        if self.kind in ("psi_aux_plus", "beta_plus"):
            if self.eps is None or self.c7 is None:
                raise ValueError(f"{self.kind} needs eps and c7")
            hi = self.problem.lam - (self.lam1_q if self.lam1_q is not None else 0.0)
            if not 0.0 < self.eps < hi:
                raise ValueError(f"eps must lie in (0, {hi:.6g}), got {self.eps}")
            if self.c7 <= 0.0:
                raise ValueError(f"c7 must be positive, got {self.c7}")
        if self.kind == "beta_plus":
            if self.upper is None:
                raise ValueError("beta_plus needs a positive anchor (upper)")
            if np.any(self.upper.values < 0.0) or not np.any(self.upper.values > 0.0):
                raise ValueError("beta_plus anchor must be nonnegative and nonzero")
        if self.kind.startswith("psihat"):
            if self.upper is None or self.lower is None:
                raise ValueError(f"{self.kind} needs both anchors (lower, upper)")
            bad = self.lower.values > self.upper.values
            if np.any(bad):
                i = int(np.flatnonzero(bad)[0])
                raise ValueError(f"anchor violation: lower > upper at node {i}")

    # -- precomputed per-spec data ----------------------------------------
    def _data(self):
        c = self._cache
        if not c:
            mesh, pr = self.mesh, self.problem
            if self.kind == "rayleigh_numerator":
                r = self.r if self.r is not None else pr.q
                a = self.weight if self.weight is not None else pr.a2
                c["terms"] = [(element_weight(mesh, a), r)]
            else:
                c["terms"] = [(element_weight(mesh, pr.a1), pr.p), (element_weight(mesh, pr.a2), pr.q)]
            c["z"] = mesh.qp_points
            if self.upper is not None:
                c["U"] = mesh.at_qp(self.upper.values)
            if self.lower is not None:
                c["V"] = mesh.at_qp(self.lower.values)
        return c

    @property
    def principal_terms(self):
        return self._data()["terms"]

    # -- reaction primitives ----------------------------------------------
    def _aux(self, x):
        pr = self.problem
        lam_e = pr.lam - self.eps
        k = lam_e * _spow(x, pr.q) - self.c7 * _spow(x, pr.p)
        K = lam_e * np.abs(x) ** pr.q / pr.q - self.c7 * np.abs(x) ** pr.p / pr.p
        return K, k

    def _mu(self, z, x, V, U):
        pr = self.problem
        c = np.clip(x, V, U)
        gV, gU = pr.reaction(z, V), pr.reaction(z, U)
        Phi = pr.reaction_primitive(z, c) + gV * np.minimum(x - V, 0.0) + gU * np.maximum(x - U, 0.0)
        return Phi, pr.reaction(z, c)

    def reaction(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
        """Primitive ``H`` and reaction ``h`` at quadrature points for qp values ``x``."""
        d = self._data()
        z = d["z"]
        pr = self.problem
        kind = self.kind
        if kind == "phi":
            return pr.reaction_primitive(z, x), pr.reaction(z, x), 0
        if kind == "phi_plus":
            y = np.maximum(x, 0.0)
            return pr.reaction_primitive(z, y), pr.reaction(z, y), 0
        if kind == "phi_minus":
            y = np.minimum(x, 0.0)
            return pr.reaction_primitive(z, y), pr.reaction(z, y), 0
        if kind == "psi_aux_plus":
            K, k = self._aux(np.maximum(x, 0.0))
            return K, k, 0
        if kind == "beta_plus":
            U = d["U"]
            K, k = self._aux(np.clip(x, 0.0, U))
            _, kU = self._aux(U)
            return K + kU * np.maximum(x - U, 0.0), k, int(np.count_nonzero(x > U))
        V, U = d["V"], d["U"]
        zero = np.zeros_like(x)
        Phi0, mu0 = self._mu(z, zero, V, U)
        out = int(np.count_nonzero((x < V) | (x > U)))
        if kind == "psihat":
            Phi, mu = self._mu(z, x, V, U)
            return Phi - Phi0, mu, out
        if kind == "psihat_plus":
            y = np.maximum(x, 0.0)
            Phi, mu = self._mu(z, y, V, U)
            return Phi - Phi0 + mu0 * np.minimum(x, 0.0), mu, out
        if kind == "psihat_minus":
            y = np.minimum(x, 0.0)
            Phi, mu = self._mu(z, y, V, U)
            return Phi - Phi0 + mu0 * np.maximum(x, 0.0), mu, out
        raise AssertionError(kind)

    # -- evaluation ---------------------------------------------------------
    def value_and_grad(self, values: np.ndarray) -> EnergyGradient:
        mesh = self.mesh
        terms = self._data()["terms"]
        if self.kind == "rayleigh_numerator":
            (a_e, r), = terms
            val, grad = _principal(mesh, values, terms)
            val, grad = r * val, r * grad
            excursions = 0
        else:
            val, grad = _principal(mesh, values, terms)
            x = mesh.at_qp(values)
            H, h, excursions = self.reaction(x)
            val -= mesh.integrate_qp(H)
            grad = grad - mesh.load_vector(h)
        grad = np.asarray(grad, dtype=float)
        grad[mesh.boundary_mask] = 0.0
        return EnergyGradient(float(val), grad, excursions)

    def hessian_guess(self, values: np.ndarray, full: bool = False) -> sp.csr_matrix:
        """Principal-part Hessian plus the reaction's share ``-int h'(z, u) phi_i phi_j``.

        By default only quadrature points with ``h' < 0`` are kept, so the
        result is positive definite; ``full=True`` keeps all of them (the true
        Hessian, possibly indefinite).
        """
        H = principal_hessian(self.mesh, values, self.principal_terms)
        if self.kind == "rayleigh_numerator":
            return self.principal_terms[0][1] * H
        mesh = self.mesh
        x = mesh.at_qp(values)
        step = 1e-7 * (1.0 + np.abs(x))
        dh = (self.reaction(x + step)[1] - self.reaction(x - step)[1]) / (2.0 * step)
        w = mesh.qp_weights * (-dh if full else np.maximum(-dh, 0.0))
        if np.any(w != 0.0):
            H = H + (mesh.interp.T @ sp.diags(w) @ mesh.interp).tocsr()
        return H


def evaluate(spec: FunctionalSpec, u: DiscreteFunction) -> EnergyGradient:
    """Energy value and weak-form residual vector (zero on boundary nodes)."""
    if u.mesh is not spec.mesh:
        raise ValueError("function and functional live on different meshes")
    return spec.value_and_grad(u.values)


def apply_operator(u: DiscreteFunction, r: float, a: ScalarField, h: DiscreteFunction) -> float:
    """Duality pairing ``<A_r^a(u), h> = int a |Du|^(r-2) Du . Dh``."""
    if r <= 1.0:
        raise ValueError(f"exponent must exceed 1, got {r}")
    mesh = u.mesh
    if h.mesh is not mesh:
        raise ValueError("u and h live on different meshes")
    _, grad = _principal(mesh, u.values, [(element_weight(mesh, a), r)])
    return float(grad @ h.values)


def operator_vector(mesh: Mesh, values: np.ndarray, r: float, a_e: np.ndarray) -> np.ndarray:
    """Nodal vector ``<A_r^a(u), e_i>`` for all basis functions."""
    return _principal(mesh, values, [(a_e, r)])[1]


def truncation_rhs(kind: str, problem: ProblemSpec, z, x, *, upper=None, lower=None,
                   eps: float | None = None, c7: float | None = None) -> np.ndarray:
    """Pointwise truncated reactions.

    ``k_plus``: the auxiliary reaction of ``x+`` frozen above the anchor ``upper``.
    ``mu``: the full reaction with ``x`` clamped to ``[lower, upper]``.
    ``mu_plus``/``mu_minus``: ``mu`` evaluated at ``x+`` / ``-x-``.
    Anchor arguments are values at the points ``z``.
    """
    x = np.asarray(x, dtype=float)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if kind == "k_plus":
        if upper is None or eps is None or c7 is None:
            raise ValueError("k_plus needs the anchor (upper), eps and c7")
        U = np.broadcast_to(np.asarray(upper, dtype=float), x.shape)
        y = np.clip(x, 0.0, np.maximum(U, 0.0))
        return (problem.lam - eps) * _spow(y, problem.q) - c7 * _spow(y, problem.p)
    if kind not in TRUNCATIONS:
        raise ValueError(f"unknown truncation {kind!r}")
    if upper is None or lower is None:
        raise ValueError(f"{kind} needs both anchors (lower, upper)")
    U = np.broadcast_to(np.asarray(upper, dtype=float), x.shape)
    V = np.broadcast_to(np.asarray(lower, dtype=float), x.shape)
    if np.any(V > U):
        raise ValueError("anchor violation: lower > upper")
    if kind == "mu_plus":
        x = np.maximum(x, 0.0)
    elif kind == "mu_minus":
        x = np.minimum(x, 0.0)
    return problem.reaction(z, np.clip(x, V, U))


def j_functional(problem: ProblemSpec, mesh: Mesh, v: np.ndarray) -> float:
    """Energy of the nodal function ``v^(1/q)`` (the convex substitution); ``inf`` if ``v < 0``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0.0):
        return float("inf")
    terms = [(element_weight(mesh, problem.a1), problem.p), (element_weight(mesh, problem.a2), problem.q)]
    return _principal(mesh, v ** (1.0 / problem.q), terms)[0]


def principal_energy(problem: ProblemSpec, u: DiscreteFunction) -> float:
    terms = [(element_weight(u.mesh, problem.a1), problem.p), (element_weight(u.mesh, problem.a2), problem.q)]
    return _principal(u.mesh, u.values, terms)[0]


__all__ = [
    "KINDS",
    "EnergyGradient",
    "FunctionalSpec",
    "evaluate",
    "apply_operator",
    "operator_vector",
    "truncation_rhs",
    "principal_hessian",
    "j_functional",
    "principal_energy",
    "ONE",
]
