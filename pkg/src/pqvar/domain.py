"""Uniform P1 meshes on intervals and rectangles, nodal functions and quadrature.

Every integral in the package goes through two sparse operators built once per
mesh: the element gradient operators (``grad_ops``) and the quadrature
interpolation matrix ``interp`` mapping nodal values to quadrature-point values.
With those, a nonlinear integral ``int G(z, u)`` is ``weights @ G(points, interp @ u)``
and its nodal derivative is ``interp.T @ (weights * g(points, interp @ u))``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

# 2-point Gauss-Legendre on [0, 1]
_GAUSS2 = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


@dataclass(frozen=True, eq=False)
class Mesh:
    dim: int
    extent: tuple
    n: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_mask: np.ndarray
    element_measures: np.ndarray
    qp_points: np.ndarray
    qp_weights: np.ndarray
    qp_element: np.ndarray
    interp: sp.csr_matrix
    grad_ops: tuple = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary_mask

    @property
    def volume(self) -> float:
        return float(self.element_measures.sum())

    @property
    def h(self) -> float:
        """Largest axis spacing."""
        if self.dim == 1:
            a, b = self.extent
            return (b - a) / self.n
        return max((hi - lo) / self.n for lo, hi in self.extent)

    def gradients(self, values: np.ndarray) -> np.ndarray:
        """Elementwise constant gradients, shape (num_elements, dim)."""
        return np.stack([g @ values for g in self.grad_ops], axis=1)

    def at_qp(self, values: np.ndarray) -> np.ndarray:
        return self.interp @ values

    def integrate_qp(self, qp_values: np.ndarray) -> float:
        return float(self.qp_weights @ qp_values)

    def element_integrals(self, qp_values: np.ndarray) -> np.ndarray:
        """Per-element quadrature sums of a quadrature-point field."""
        return np.bincount(self.qp_element, weights=self.qp_weights * qp_values,
                           minlength=self.num_elements)

    def load_vector(self, qp_values: np.ndarray) -> np.ndarray:
        """Nodal vector ``int v e_i`` for a field given at quadrature points."""
        return self.interp.T @ (self.qp_weights * qp_values)

    def mass_matrix(self) -> sp.csr_matrix:
        return (self.interp.T @ sp.diags(self.qp_weights) @ self.interp).tocsr()

    def stiffness_matrix(self, element_tensor: np.ndarray) -> sp.csr_matrix:
        """Assemble ``sum_e |e| D_e^T W_e D_e`` for per-element (dim, dim) tensors.

        ``element_tensor`` has shape (num_elements,) for isotropic weights or
        (num_elements, dim, dim); it must already include the element measure.
        """
        if element_tensor.ndim == 1:
            mats = [g.T @ sp.diags(element_tensor) @ g for g in self.grad_ops]
            return sum(mats[1:], mats[0]).tocsr()
        total = None
        for i, gi in enumerate(self.grad_ops):
            for j, gj in enumerate(self.grad_ops):
                term = gi.T @ sp.diags(element_tensor[:, i, j]) @ gj
                total = term if total is None else total + term
        return total.tocsr()

    def locate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Element index and barycentric coordinates of points inside the extent."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dim == 1:
            a, b = self.extent
            hx = (b - a) / self.n
            s = (points[:, 0] - a) / hx
            cell = np.clip(np.floor(s).astype(int), 0, self.n - 1)
            t = s - cell
            return cell, np.stack([1.0 - t, t], axis=1)
        (x0, x1), (y0, y1) = self.extent
        hx, hy = (x1 - x0) / self.n, (y1 - y0) / self.n
        sx = (points[:, 0] - x0) / hx
        sy = (points[:, 1] - y0) / hy
        i = np.clip(np.floor(sx).astype(int), 0, self.n - 1)
        j = np.clip(np.floor(sy).astype(int), 0, self.n - 1)
        tx, ty = sx - i, sy - j
        lower = tx >= ty
        # triangle (v00, v10, v11) below the diagonal, (v00, v11, v01) above it
        elem = 2 * (j * self.n + i) + np.where(lower, 0, 1)
        bary = np.where(lower[:, None],
                        np.stack([1.0 - tx, tx - ty, ty], axis=1),
                        np.stack([1.0 - ty, tx, ty - tx], axis=1))
        return elem, bary

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate the P1 interpolant of nodal ``values`` at arbitrary points."""
        elem, bary = self.locate(points)
        return np.einsum("ij,ij->i", values[self.elements[elem]], bary)


def build_mesh(dim: int, extent, n: int) -> Mesh:
    """Uniform mesh of an interval (dim 1) or rectangle split into triangles (dim 2)."""
    if n < 2:
        raise ValueError(f"need at least 2 subdivisions per axis, got n={n}")
    if dim == 1:
        a, b = (float(v) for v in extent)
        if not b > a:
            raise ValueError(f"degenerate interval ({a}, {b})")
        return _build_1d(a, b, n)
    if dim == 2:
        (x0, x1), (y0, y1) = ((float(lo), float(hi)) for lo, hi in extent)
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate rectangle {extent}")
        return _build_2d(x0, x1, y0, y1, n)
    raise ValueError(f"dim must be 1 or 2, got {dim}")


def _build_1d(a: float, b: float, n: int) -> Mesh:
    x = np.linspace(a, b, n + 1)
    elements = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    hx = np.diff(x)
    boundary = np.zeros(n + 1, dtype=bool)
    boundary[[0, -1]] = True

    rows = np.repeat(np.arange(n), 2)
    cols = elements.ravel()
    vals = np.stack([-1.0 / hx, 1.0 / hx], axis=1).ravel()
    grad = sp.csr_matrix((vals, (rows, cols)), shape=(n, n + 1))

    qp_elem = np.repeat(np.arange(n), 2)
    t = np.tile(_GAUSS2, n)
    qp_x = x[qp_elem] + t * hx[qp_elem]
    qp_w = np.repeat(hx / 2.0, 2)
    qrows = np.repeat(np.arange(2 * n), 2)
    qcols = elements[qp_elem].ravel()
    qvals = np.stack([1.0 - t, t], axis=1).ravel()
    interp = sp.csr_matrix((qvals, (qrows, qcols)), shape=(2 * n, n + 1))

    return Mesh(1, (a, b), n, x[:, None], elements, boundary, hx,
                qp_x[:, None], qp_w, qp_elem, interp, (grad,))


def _build_2d(x0: float, x1: float, y0: float, y1: float, n: int) -> Mesh:
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys)  # node index = j * (n + 1) + i
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v11 = idx[1:, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    elements = np.empty((2 * n * n, 3), dtype=int)
    elements[0::2] = lower
    elements[1::2] = upper

    P = nodes[elements]  # (E, 3, 2)
    J = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)  # columns are edges
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    measures = 0.5 * np.abs(det)
    Jinv = np.linalg.inv(J)
    # reference gradients of (1 - s - t, s, t)
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    phys = np.einsum("kd,edc->ekc", ref, Jinv)  # (E, 3 basis, 2 coords)

    E = elements.shape[0]
    rows = np.repeat(np.arange(E), 3)
    cols = elements.ravel()
    grads = tuple(sp.csr_matrix((phys[:, :, c].ravel(), (rows, cols)), shape=(E, nodes.shape[0]))
                  for c in range(2))

    on_edge = (np.isclose(nodes[:, 0], x0) | np.isclose(nodes[:, 0], x1)
               | np.isclose(nodes[:, 1], y0) | np.isclose(nodes[:, 1], y1))

    # edge-midpoint rule, exact for quadratics
    bary = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    qp_elem = np.repeat(np.arange(E), 3)
    qp_bary = np.tile(bary, (E, 1))
    qp_pts = np.einsum("qk,qkd->qd", qp_bary, P[qp_elem])
    qp_w = np.repeat(measures / 3.0, 3)
    qrows = np.repeat(np.arange(3 * E), 3)
    qcols = elements[qp_elem].ravel()
    interp = sp.csr_matrix((qp_bary.ravel(), (qrows, qcols)), shape=(3 * E, nodes.shape[0]))

    return Mesh(2, ((x0, x1), (y0, y1)), n, nodes, elements, on_edge, measures,
                qp_pts, qp_w, qp_elem, interp, grads)


class DiscreteFunction:
    """Nodal values of a P1 function vanishing on the Dirichlet boundary."""

    __slots__ = ("mesh", "values")

    def __init__(self, mesh: Mesh, values):
        values = np.array(values, dtype=float)
        if values.shape != (mesh.num_nodes,):
            raise ValueError(f"expected {mesh.num_nodes} nodal values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("nodal values must be finite")
        if np.any(values[mesh.boundary_mask] != 0.0):
            raise ValueError("boundary nodal values must be exactly 0")
        values.flags.writeable = False
        self.mesh = mesh
        self.values = values

    @classmethod
    def zeros(cls, mesh: Mesh) -> "DiscreteFunction":
        return cls(mesh, np.zeros(mesh.num_nodes))

    @classmethod
    def from_callable(cls, mesh: Mesh, fn: Callable[[np.ndarray], np.ndarray]) -> "DiscreteFunction":
        """Nodal interpolant of ``fn(points)`` with boundary values forced to 0."""
        vals = np.asarray(fn(mesh.nodes), dtype=float).reshape(mesh.num_nodes).copy()
        vals[mesh.boundary_mask] = 0.0
        return cls(mesh, vals)

    @classmethod
    def from_interior(cls, mesh: Mesh, values) -> "DiscreteFunction":
        """Like the constructor, but boundary entries of ``values`` are overwritten by 0."""
        vals = np.array(values, dtype=float)
        vals[mesh.boundary_mask] = 0.0
        return cls(mesh, vals)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _check(self, other: "DiscreteFunction") -> None:
        if other.mesh is not self.mesh:
            raise ValueError("functions live on different meshes")

    def __add__(self, other):
        self._check(other)
        return DiscreteFunction(self.mesh, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return DiscreteFunction(self.mesh, self.values - other.values)

    def __neg__(self):
        return DiscreteFunction(self.mesh, -self.values)

    def __mul__(self, scalar: float):
        return DiscreteFunction(self.mesh, float(scalar) * self.values)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"DiscreteFunction(n_nodes={self.values.size}, sup={self.sup_norm():.3g})"


# -- weights --------------------------------------------------------------

def _affine(points, value=1.0, slope=(0.0, 0.0)):
    slope = np.asarray(slope, dtype=float)[: points.shape[1]]
    return value + points @ slope


def _sine_bump(points, base=1.0, amplitude=0.5, extent=None):
    # base + amplitude * prod sin(pi (z - lo) / L); positive whenever base > 0, amplitude >= 0
    out = np.ones(points.shape[0])
    bounds = [extent] if points.shape[1] == 1 else list(extent)
    for d, (lo, hi) in enumerate(bounds):
        out *= np.sin(np.pi * (points[:, d] - lo) / (hi - lo))
    return base + amplitude * out


WEIGHT_FAMILIES: dict[str, Callable] = {"affine": _affine, "sine_bump": _sine_bump}


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A weight ``a(z)``: constant, a named family, or tabulated per node of a mesh."""

    kind: str
    value: float = 1.0
    name: str | None = None
    params: dict = field(default_factory=dict)
    mesh: Mesh | None = None
    nodal: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "family", "tabulated"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "family" and self.name not in WEIGHT_FAMILIES:
            raise ValueError(f"unknown weight family {self.name!r}")
        if self.kind == "tabulated" and (self.mesh is None or self.nodal is None):
            raise ValueError("tabulated weights need a mesh and nodal values")

    @classmethod
    def constant(cls, value: float) -> "ScalarField":
        return cls("constant", value=float(value))

    @classmethod
    def family(cls, name: str, **params) -> "ScalarField":
        return cls("family", name=name, params=params)

    @classmethod
    def tabulated(cls, mesh: Mesh, nodal) -> "ScalarField":
        return cls("tabulated", mesh=mesh, nodal=np.asarray(nodal, dtype=float))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "constant":
            out = np.full(points.shape[0], self.value)
        elif self.kind == "family":
            out = WEIGHT_FAMILIES[self.name](points, **self.params)
        else:
            out = self.mesh.interpolate(self.nodal, points)
        if not np.all(np.isfinite(out)):
            raise ValueError("weight evaluates to non-finite values")
        return out

    def on_mesh(self, mesh: Mesh) -> np.ndarray:
        """Values at the quadrature points of ``mesh``."""
        if self.kind == "tabulated" and self.mesh is mesh:
            return mesh.at_qp(self.nodal)
        return self.evaluate(mesh.qp_points)

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "family":
            return {"kind": "family", "name": self.name, "params": dict(self.params)}
        return {"kind": "tabulated", "values": self.nodal.tolist()}


ONE = ScalarField.constant(1.0)


def element_weight(mesh: Mesh, a: ScalarField) -> np.ndarray:
    """``int_e a dz`` for each element; raises if ``a`` is not positive at a quadrature point."""
    aq = a.on_mesh(mesh)
    if np.any(aq <= 0.0):
        k = int(np.argmin(aq))
        raise ValueError(f"weight must be positive, got {aq[k]:.6g} at {mesh.qp_points[k]}")
    return mesh.element_integrals(aq)


# -- norms and sign decomposition -----------------------------------------

def _gradient_power(mesh: Mesh, values: np.ndarray, r: float) -> np.ndarray:
    g = mesh.gradients(values)
    return np.sum(g * g, axis=1) ** (r / 2.0)


def sobolev_gradient_norm(u: DiscreteFunction, r: float, a: ScalarField = ONE) -> float:
    """``int a |grad u|^r`` over the domain (the r-th power, not its root)."""
    if r <= 1.0:
        raise ValueError(f"exponent must exceed 1, got {r}")
    mesh = u.mesh
    return float(element_weight(mesh, a) @ _gradient_power(mesh, u.values, r))


def lr_norm(u: DiscreteFunction, r: float) -> float:
    if r <= 1.0:
        raise ValueError(f"exponent must exceed 1, got {r}")
    uq = u.mesh.at_qp(u.values)
    return u.mesh.integrate_qp(np.abs(uq) ** r) ** (1.0 / r)


def positive_part(u: DiscreteFunction) -> DiscreteFunction:
    return DiscreteFunction(u.mesh, np.maximum(u.values, 0.0))


def negative_part(u: DiscreteFunction) -> DiscreteFunction:
    return DiscreteFunction(u.mesh, np.maximum(-u.values, 0.0))


# -- CSV ------------------------------------------------------------------

def _header(dim: int) -> list[str]:
    return ["node_index", "x", "value"] if dim == 1 else ["node_index", "x", "y", "value"]


def write_csv(u: DiscreteFunction, path) -> None:
    mesh = u.mesh
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header(mesh.dim))
        for i in range(mesh.num_nodes):
            coords = [f"{c:.17g}" for c in mesh.nodes[i]]
            w.writerow([i, *coords, f"{u.values[i]:.17g}"])


def read_nodal_csv(path, mesh: Mesh) -> np.ndarray:
    """Read a ``node_index,x[,y],value`` table; returns values ordered by node index."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "value" not in rows[0]:
        raise ValueError(f"{path}: expected header {','.join(_header(mesh.dim))}")
    vals = np.empty(mesh.num_nodes)
    seen = np.zeros(mesh.num_nodes, dtype=bool)
    for row in rows:
        i = int(row["node_index"])
        vals[i] = float(row["value"])
        seen[i] = True
    if not seen.all():
        raise ValueError(f"{path}: missing {int((~seen).sum())} node values")
    return vals


def read_csv(path, mesh: Mesh) -> DiscreteFunction:
    return DiscreteFunction(mesh, read_nodal_csv(path, mesh))
