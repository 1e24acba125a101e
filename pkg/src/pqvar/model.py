"""Problem data: exponents, weights, parameter and the reaction ``f``.

Nonlinearities come from a closed registry of power families with exact
primitives, so every truncated energy downstream can be spliced in closed form.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .domain import Mesh, ScalarField

HYPOTHESES = ("H1", "H1'", "H1''")


def _spow(x: np.ndarray, s: float) -> np.ndarray:
    """Signed power ``|x|^(s-2) x`` written as ``sign(x)|x|^(s-1)`` (finite at 0 for s > 1)."""
    return np.sign(x) * np.abs(x) ** (s - 1.0)


@dataclass(frozen=True)
class NonlinearitySpec:
    """Reaction ``f(z, x)`` with its primitive ``F(z, x) = int_0^x f(z, s) ds``.

    ``f`` and ``F`` are vectorised over matching arrays of points ``z`` (shape
    (m, dim)) and values ``x`` (shape (m,)).  ``weight`` multiplies both.
    """

    family: str
    params: dict
    tau: float
    declared_satisfies: frozenset = frozenset()
    weight: ScalarField | None = None
    reflected: bool = False
    _f: Callable = field(default=None, repr=False, compare=False)
    _F: Callable = field(default=None, repr=False, compare=False)

    def _w(self, z):
        return 1.0 if self.weight is None else self.weight.evaluate(z)

    def f(self, z, x):
        x = np.asarray(x, dtype=float)
        if self.reflected:
            return -self._w(z) * self._f(-x)
        return self._w(z) * self._f(x)

    def F(self, z, x):
        x = np.asarray(x, dtype=float)
        if self.reflected:
            return self._w(z) * self._F(-x)
        return self._w(z) * self._F(x)

    def reflect(self) -> "NonlinearitySpec":
        """The reaction ``x -> -f(z, -x)``; maps negative solutions to positive ones."""
        return dataclasses.replace(self, reflected=not self.reflected)

    def to_dict(self) -> dict:
        out = {"family": self.family, "params": dict(self.params)}
        if self.weight is not None:
            out["weight"] = self.weight.to_dict()
        return out


def builtin_nonlinearity(name: str, params: dict | None = None, *, p: float, q: float,
                         weight: ScalarField | None = None,
                         declared=None) -> NonlinearitySpec:
    """Build one of the registered reactions.

    ``resonant_power(mu, c, tau)``: ``f = mu|x|^(p-2)x - c|x|^(tau-2)x``.  With
    ``mu`` equal to the principal eigenvalue of the weighted p-Laplacian this is
    resonant at infinity, ``f x - pF = c(p/tau - 1)|x|^tau`` grows past
    ``|x|^tau``-scale and ``f x <= mu |x|^p`` everywhere.

    ``subcritical_power(c, s)``: ``f = c|x|^(s-2)x`` with ``s`` in (q, p); coercive
    through sublinear growth rather than through the ``f x - pF`` condition.

    ``zero``: ``f = 0``, for exercising the machinery only.

    The growth exponent checked by the ``f x - pF`` condition is placed halfway
    between ``q`` and the family exponent, so the ratio tends to infinity.
    """
    params = dict(params or {})
    if not 1.0 < q < p:
        raise ValueError(f"need 1 < q < p, got q={q}, p={p}")
    if name == "zero":
        return NonlinearitySpec("zero", params, tau=0.5 * (p + q), declared_satisfies=frozenset(),
                                weight=weight, _f=lambda x: np.zeros_like(x),
                                _F=lambda x: np.zeros_like(x))
    if name == "resonant_power":
        mu = float(params["mu"])
        c = float(params.get("c", 1.0))
        tau = float(params.get("tau", 0.5 * (p + q)))
        if not q < tau < p:
            raise ValueError(f"tau must lie in (q, p) = ({q}, {p}), got {tau}")
        if c <= 0.0:
            raise ValueError(f"c must be positive, got {c}")
        params.update(mu=mu, c=c, tau=tau)
        return NonlinearitySpec(
            "resonant_power", params, tau=0.5 * (q + tau),
            declared_satisfies=frozenset(("H1", "H1''") if declared is None else declared),
            weight=weight,
            _f=lambda x: mu * _spow(x, p) - c * _spow(x, tau),
            _F=lambda x: mu * np.abs(x) ** p / p - c * np.abs(x) ** tau / tau)
    if name == "subcritical_power":
        c = float(params.get("c", 1.0))
        s = float(params.get("s", 0.5 * (p + q)))
        if not q < s < p:
            raise ValueError(f"s must lie in (q, p) = ({q}, {p}), got {s}")
        if c <= 0.0:
            raise ValueError(f"c must be positive, got {c}")
        params.update(c=c, s=s)
        return NonlinearitySpec("subcritical_power", params, tau=0.5 * (q + s),
                                declared_satisfies=frozenset(declared or ()),
                                weight=weight,
                                _f=lambda x: c * _spow(x, s),
                                _F=lambda x: c * np.abs(x) ** s / s)
    raise ValueError(f"unknown nonlinearity family {name!r}")


@dataclass(frozen=True)
class ProblemSpec:
    """Data of ``-div(a1|Du|^(p-2)Du) - div(a2|Du|^(q-2)Du) = lam|u|^(q-2)u + f(z,u)``."""

    p: float
    q: float
    a1: ScalarField
    a2: ScalarField
    lam: float
    f: NonlinearitySpec
    c1: float | None = None

    def __post_init__(self):
        if not 1.0 < self.q < self.p:
            raise ValueError(f"q: need 1 < q < p, got q={self.q}, p={self.p}")
        if not self.lam > 0.0:
            raise ValueError(f"lambda: must be positive, got {self.lam}")
        if self.c1 is not None and self.c1 <= 0.0:
            raise ValueError(f"c1: must be positive, got {self.c1}")

    def with_lambda(self, lam: float) -> "ProblemSpec":
        return dataclasses.replace(self, lam=float(lam))

    def reflect(self) -> "ProblemSpec":
        """Problem whose positive solutions are the negated negative solutions of this one."""
        return dataclasses.replace(self, f=self.f.reflect())

    def reaction(self, z, x):
        """Full right-hand side ``lam |x|^(q-2) x + f(z, x)``."""
        return self.lam * _spow(x, self.q) + self.f.f(z, x)

    def reaction_primitive(self, z, x):
        return self.lam * np.abs(x) ** self.q / self.q + self.f.F(z, x)

    def weight_floor(self, mesh: Mesh) -> float:
        return float(min(self.a1.on_mesh(mesh).min(), self.a2.on_mesh(mesh).min()))


# -- hypothesis sampling ---------------------------------------------------

@dataclass
class HypothesisCheck:
    verdict: str  # "pass" | "fail" | "inconclusive"
    margin: float
    witness: dict
    note: str = ""


@dataclass
class HypothesisReport:
    checks: dict
    m_s: dict = field(default_factory=dict)

    def verdict(self, key: str) -> str:
        return self.checks[key].verdict

    def to_dict(self) -> dict:
        return {
            "checks": {k: dataclasses.asdict(v) for k, v in self.checks.items()},
            "m_s": {str(k): v for k, v in self.m_s.items()},
        }


def sample_grid(X: float = 100.0, per_decade: int = 10, smallest: float = 1e-6) -> np.ndarray:
    """Symmetric log-spaced x-grid on [-X, X]; contains +-1 exactly."""
    lo, hi = np.log10(smallest), np.log10(X)
    k = np.arange(int(np.floor(lo * per_decade)), int(np.ceil(hi * per_decade)) + 1)
    pos = 10.0 ** (k / per_decade)
    pos = pos[(pos >= smallest * (1 - 1e-12)) & (pos <= X * (1 + 1e-12))]
    return np.concatenate([-pos[::-1], pos])


def _z_samples(mesh: Mesh | None, dim: int = 1) -> np.ndarray:
    if mesh is None:
        return np.zeros((1, dim))
    pts = mesh.qp_points
    step = max(1, pts.shape[0] // 16)
    return pts[::step]


def check_hypotheses(spec: ProblemSpec, mesh: Mesh | None = None, *, X: float = 100.0,
                     lam1_p: float | None = None, delta: float = 1e-3,
                     tol: float = 1e-8) -> HypothesisReport:
    """Sample the structural hypotheses on a grid of z (quadrature points) and x.

    Asymptotic clauses get "pass" when the sampled trend supports them, "fail"
    when a sampled value contradicts them outright, "inconclusive" otherwise.
    ``lam1_p`` is the principal eigenvalue of the weighted p-Laplacian; clauses
    that need it are inconclusive without it.
    """
    p, q = spec.p, spec.q
    zs = _z_samples(mesh)
    xs = sample_grid(X)
    Z = np.repeat(zs, xs.size, axis=0)
    Xs = np.tile(xs, zs.shape[0])
    fv = spec.f.f(Z, Xs)
    Fv = spec.f.F(Z, Xs)
    checks: dict[str, HypothesisCheck] = {}

    def wit(k):
        return {"z": Z[k].tolist(), "x": float(Xs[k])}

    # H0
    a_min = None
    if mesh is not None:
        a_min = spec.weight_floor(mesh)
    elif spec.a1.kind != "tabulated" and spec.a2.kind != "tabulated":
        a_min = float(min(spec.a1.evaluate(zs).min(), spec.a2.evaluate(zs).min()))
    if a_min is not None:
        c1 = spec.c1 if spec.c1 is not None else a_min
        margin = a_min - c1
        ok = a_min > 0.0 and margin >= 0.0
        checks["H0"] = HypothesisCheck("pass" if ok else "fail", margin,
                                       {"min_weight": a_min, "c1": c1})
    else:
        checks["H0"] = HypothesisCheck("inconclusive", float("nan"), {}, "tabulated weight without mesh")

    # f(z,0) = 0
    f0 = spec.f.f(zs, np.zeros(zs.shape[0]))
    checks["H1(f0)"] = HypothesisCheck("pass" if np.all(f0 == 0.0) else "fail",
                                       -float(np.max(np.abs(f0))), {})

    # (i) local boundedness: finite values on the sampled box
    finite = np.all(np.isfinite(fv)) and np.all(np.isfinite(Fv))
    checks["H1(i)"] = HypothesisCheck("pass" if finite else "fail",
                                      float(np.max(np.abs(fv))) if finite else float("inf"), {})

    big = np.abs(Xs) >= 0.1 * X
    fx = fv * Xs
    # (ii) limsup f/(|x|^(p-2)x) <= lam1_p
    ratio = fv / _spow(Xs, p)
    if lam1_p is None:
        checks["H1(ii)"] = HypothesisCheck("inconclusive", float("nan"), {}, "lam1_p not supplied")
    else:
        k = np.flatnonzero(big)[np.argmax(ratio[big])]
        margin = lam1_p - ratio[k]
        checks["H1(ii)"] = HypothesisCheck("pass" if margin >= -tol * max(1.0, lam1_p) else "fail",
                                           float(margin), wit(k))

    # (iii) (f x - pF)/|x|^tau increasing and positive on the largest decade
    growth = (fx - p * Fv) / np.abs(Xs) ** spec.f.tau
    top = np.flatnonzero(np.abs(Xs) >= 0.1 * X)
    g2 = growth.reshape(zs.shape[0], xs.size)
    cols_pos = np.flatnonzero(xs >= 0.1 * X)
    cols_neg = np.flatnonzero(xs <= -0.1 * X)[::-1]
    d_pos = np.diff(g2[:, cols_pos], axis=1)
    d_neg = np.diff(g2[:, cols_neg], axis=1)
    k = top[np.argmin(growth[top])]
    inc = np.all(d_pos > 0) and np.all(d_neg > 0)
    if inc and growth[k] > 0:
        v3 = "pass"
    elif np.all(d_pos <= 0) and growth[k] <= 0:
        v3 = "fail"
    else:
        v3 = "inconclusive"
    checks["H1(iii)"] = HypothesisCheck(v3, float(growth[k]), wit(k),
                                        "trend of (f x - pF)/|x|^tau on |x| >= X/10")

    # (iv) f/|x|^(q-2)x -> 0 as x -> 0
    small = (np.abs(Xs) <= delta) & (Xs != 0)
    r4 = np.abs(fv[small]) / np.abs(Xs[small]) ** (q - 1.0)
    k = np.flatnonzero(small)[np.argmax(r4)]
    cols = np.flatnonzero((np.abs(xs) <= delta) & (xs != 0))
    cols = cols[np.argsort(np.abs(xs[cols]), kind="stable")]
    ax = np.abs(xs[cols])
    rows = np.abs(fv.reshape(zs.shape[0], xs.size)[:, cols]) / ax ** (q - 1.0)
    if np.max(r4) <= tol:
        v4 = "pass"
    elif all(np.all(np.diff(rw) >= 0) and np.all(rw > 0) and np.polyfit(np.log(ax), np.log(rw), 1)[0] > 0.05
             for rw in rows):
        v4 = "pass"  # power-law decay towards 0
    elif np.any(rows[:, 0] >= rows[:, -1]):
        v4 = "fail"
    else:
        v4 = "inconclusive"
    checks["H1(iv)"] = HypothesisCheck(v4, -float(np.max(r4)), wit(k))

    # (v) f x bounded below by m_s > 0 for |x| >= s; witness: worst point, ties nearest x = 1
    keyed = np.lexsort((-Xs, np.abs(np.log(np.abs(Xs))), fx))
    k = keyed[0]
    checks["H1(v)"] = HypothesisCheck("pass" if fx[k] > 0 else "fail", float(fx[k]), wit(k))
    m_s = {}
    for s in (1e-2, 1e-1, 1.0, 10.0):
        sel = np.abs(Xs) >= s
        m_s[s] = float(np.min(fx[sel]))

    # H1'(vi): q = 2 and f + xi |x|^(p-2) x nondecreasing on [-rho, rho]
    if q != 2.0:
        checks["H1'(vi)"] = HypothesisCheck("inconclusive", float("nan"), {}, "requires q = 2")
    else:
        worst = 0.0
        finite_xi = True
        for z in zs:
            for rho in (1.0, 10.0, X):
                xr = np.linspace(-rho, rho, 2001)
                fr = spec.f.f(np.repeat(z[None], xr.size, axis=0), xr)
                dphi = np.diff(_spow(xr, p))
                need = -np.diff(fr) / dphi
                xi = float(np.max(need))
                worst = max(worst, xi)
                if not np.isfinite(xi) or xi > 1e8:
                    finite_xi = False
        # a shift that must blow up under refinement near 0 signals failure
        xr = np.linspace(-1e-3, 1e-3, 2001)
        fr = spec.f.f(np.repeat(zs[:1], xr.size, axis=0), xr)
        need0 = float(np.max(-np.diff(fr) / np.diff(_spow(xr, p))))
        if need0 > 10.0 * max(worst, 1.0):
            finite_xi = False
        checks["H1'(vi)"] = HypothesisCheck("pass" if finite_xi else "fail", -worst,
                                            {"xi_needed": max(worst, need0)})

    # H1''(vi): f x <= lam1_p |x|^p
    if lam1_p is None:
        checks["H1''(vi)"] = HypothesisCheck("inconclusive", float("nan"), {}, "lam1_p not supplied")
    else:
        gap = lam1_p * np.abs(Xs) ** p - fx
        scale = 1.0 + lam1_p * np.abs(Xs) ** p
        k = int(np.argmin(gap / scale))
        checks["H1''(vi)"] = HypothesisCheck("pass" if gap[k] >= -tol * scale[k] else "fail",
                                             float(gap[k]), wit(k))
    return HypothesisReport(checks, m_s)
