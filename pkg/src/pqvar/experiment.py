"""Config loading, single-problem runs and lambda sweeps."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .domain import Mesh, ScalarField, build_mesh, read_nodal_csv, write_csv
from .model import ProblemSpec, _spow, builtin_nonlinearity, check_hypotheses
from .solve import (
    SolverParams,
    constant_sign_solution,
    extremal_solution,
    mountain_pass_nodal,
    nonexistence_scan,
    solve_auxiliary,
)
from .spectrum import principal_eigenpair, second_eigenvalue

TASKS = ("positive", "negative", "auxiliary", "extremal", "nodal", "nonexistence")
_ORDER = {t: i for i, t in enumerate(TASKS)}
SKIPPED = "skipped"


class ConfigError(ValueError):
    """Schema violation; the message starts with the offending field path."""


def _get(cfg: dict, key: str, path: str, kind=None, default=...):
    if key not in cfg:
        if default is ...:
            raise ConfigError(f"{path}{key}: missing")
        return default
    val = cfg[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"{path}{key}: expected {getattr(kind, '__name__', kind)}")
    return val


def _weight(cfg, path: str, mesh: Mesh, base: Path) -> ScalarField:
    if isinstance(cfg, (int, float)):
        return ScalarField.constant(float(cfg))
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: expected object")
    kind = _get(cfg, "kind", path + ".")
    if kind == "constant":
        return ScalarField.constant(float(_get(cfg, "value", path + ".", (int, float))))
    if kind == "family":
        try:
            return ScalarField.family(_get(cfg, "name", path + ".", str), **cfg.get("params", {}))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}.name: {exc}") from exc
    if kind == "tabulated":
        file = base / _get(cfg, "path", path + ".", str)
        try:
            return ScalarField.tabulated(mesh, read_nodal_csv(file, mesh))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{path}.path: {exc}") from exc
    raise ConfigError(f"{path}.kind: unknown weight kind {kind!r}")


@dataclass(eq=False)
class Thresholds:
    lam1_p: float
    lam1_q: float
    lam2_q: float
    q_pair: object = field(repr=False, default=None)
    second: object = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"lam1_p": self.lam1_p, "lam1_q": self.lam1_q, "lam2_q": self.lam2_q,
                "lam2_q_residual": self.second.residual_norm, "lam2_q_path_dense_max": self.second.dense_max}


@dataclass(eq=False)
class LoadedProblem:
    """Parsed config: mesh, weights and the pieces needed to build a ProblemSpec."""

    mesh: Mesh
    p: float
    q: float
    a1: ScalarField
    a2: ScalarField
    f_cfg: dict
    lam_cfg: object
    c1: float | None
    tasks: tuple
    params: SolverParams
    aux: dict
    path_knots: int
    eigen_knots: int
    raw: dict

    def thresholds(self) -> Thresholds:
        lam1_p = principal_eigenpair(self.mesh, self.p, self.a1).lambda_hat
        q_pair = principal_eigenpair(self.mesh, self.q, self.a2)
        second = second_eigenvalue(self.mesh, self.q, self.a2, self.eigen_knots, principal=q_pair)
        return Thresholds(lam1_p, q_pair.lambda_hat, second.lambda_hat_2, q_pair, second)

    def lam(self, th: Thresholds, cfg=None) -> float:
        return resolve_lambda(self.lam_cfg if cfg is None else cfg, th)

    def problem(self, th: Thresholds, lam: float) -> ProblemSpec:
        params = {}
        for k, v in dict(self.f_cfg.get("params", {})).items():
            params[k] = _symbol(v, th, f"f.params.{k}")
        try:
            f = builtin_nonlinearity(self.f_cfg["family"], params, p=self.p, q=self.q)
            return ProblemSpec(p=self.p, q=self.q, a1=self.a1, a2=self.a2, lam=lam, f=f, c1=self.c1)
        except ValueError as exc:
            msg = str(exc)
            raise ConfigError(msg if ":" in msg.split(" ")[0] else f"f: {msg}") from exc


def _symbol(v, th: Thresholds, path: str) -> float:
    if isinstance(v, str):
        if v in ("lam1_p", "lam1_q", "lam2_q"):
            return getattr(th, v)
        raise ConfigError(f"{path}: unknown symbol {v!r}")
    return float(v)


def resolve_lambda(cfg, th: Thresholds) -> float:
    """A number, a symbol, or ``{"relative_to": sym, "factor": a, "offset": b}``."""
    if isinstance(cfg, (int, float, str)):
        return _symbol(cfg, th, "lambda")
    if isinstance(cfg, dict):
        ref = _symbol(_get(cfg, "relative_to", "lambda."), th, "lambda.relative_to")
        return float(cfg.get("factor", 1.0)) * ref + float(cfg.get("offset", 0.0))
    raise ConfigError("lambda: expected number, symbol or object")


def load_problem(cfg: dict | str | Path, base: Path | None = None) -> LoadedProblem:
    if not isinstance(cfg, dict):
        path = Path(cfg)
        base = path.parent
        with open(path) as fh:
            cfg = json.load(fh)
    base = base or Path(".")
    dim = _get(cfg, "dim", "", int)
    if dim not in (1, 2):
        raise ConfigError("dim: must be 1 or 2")
    extent = _get(cfg, "extent", "", list)
    n = _get(cfg, "n", "", int)
    try:
        mesh = build_mesh(dim, extent if dim == 1 else [tuple(e) for e in extent], n)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"extent/n: {exc}") from exc
    p = float(_get(cfg, "p", "", (int, float)))
    q = float(_get(cfg, "q", "", (int, float)))
    if not 1.0 < q < p:
        raise ConfigError("q: need 1 < q < p")
    a1 = _weight(cfg.get("a1", 1.0), "a1", mesh, base)
    a2 = _weight(cfg.get("a2", 1.0), "a2", mesh, base)
    f_cfg = _get(cfg, "f", "", dict)
    _get(f_cfg, "family", "f.", str)
    lam_cfg = cfg.get("lambda", None)
    tasks = tuple(cfg.get("tasks", ("positive", "negative")))
    bad = [t for t in tasks if t not in TASKS]
    if bad or not tasks:
        raise ConfigError(f"tasks: unknown or empty {bad}")
    scfg = dict(cfg.get("solver", {}))
    try:
        params = SolverParams(seed=int(cfg.get("seed", 0)), **scfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from exc
    return LoadedProblem(
        mesh=mesh, p=p, q=q, a1=a1, a2=a2, f_cfg=f_cfg, lam_cfg=lam_cfg,
        c1=cfg.get("c1"), tasks=tuple(sorted(tasks, key=_ORDER.get)), params=params,
        aux=dict(cfg.get("aux", {})), path_knots=int(cfg.get("path_knots", 17)),
        eigen_knots=int(cfg.get("eigen_knots", 21)), raw=cfg,
    )


def auxiliary_constants(problem: ProblemSpec, mesh: Mesh, lam1_q: float, eps=None, c7=None):
    """Defaults ``eps = (lam - lam1_q)/2`` and the smallest sampled ``c7`` (times 1.1, at
    least 1e-3) with ``f(z, x) >= -eps x^(q-1) - c7 x^(p-1)`` for ``x > 0``."""
    if eps is None or eps == "auto":
        eps = 0.5 * (problem.lam - lam1_q)
    eps = float(eps)
    if c7 is None or c7 == "auto":
        x = np.logspace(-6, 3, 400)
        zs = mesh.qp_points[:: max(1, mesh.qp_points.shape[0] // 16)]
        need = 0.0
        for sgn, f in ((1.0, problem.f), (1.0, problem.f.reflect())):
            for z in zs:
                fz = f.f(np.repeat(z[None], x.size, axis=0), sgn * x)
                need = max(need, float(np.max((-fz - eps * _spow(x, problem.q)) / x ** (problem.p - 1.0))))
        c7 = max(1.1 * need, 1e-3)
    return eps, float(c7)


# -- single problem ----------------------------------------------------------

def _rep_dict(rep) -> dict:
    return rep.summary()


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, NaN to null, infinities to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            return None
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def solve_tasks(lp: LoadedProblem, th: Thresholds, lam: float, tasks=None, params: SolverParams | None = None):
    """Run ``tasks`` (with prerequisites) at one lambda.  Returns ``(outcomes, solutions, problem)``."""
    params = params or lp.params
    tasks = set(tasks or lp.tasks)
    if "nodal" in tasks:
        tasks |= {"extremal"}
    if "extremal" in tasks:
        tasks |= {"positive", "negative", "auxiliary"}
    pr = lp.problem(th, lam)
    mesh = lp.mesh
    out: dict = {}
    sols: dict = {}
    above1 = lam > th.lam1_q
    above2 = lam > th.lam2_q

    def guarded(name, fn):
        try:
            return fn()
        except (ValueError, RuntimeError) as exc:
            out[name] = {"status": "failed", "error": str(exc)}
            return None

    for sign, name in ((1, "positive"), (-1, "negative")):
        if name in tasks:
            rep = guarded(name, lambda: constant_sign_solution(pr, mesh, sign, params, q_pair=th.q_pair))
            if rep is not None:
                want = name
                found = rep.converged and rep.classification == want
                out[name] = {"status": "ok", "found": found, **_rep_dict(rep)}
                if found:
                    sols[name] = rep.solution
    eps = c7 = None
    if "auxiliary" in tasks or "extremal" in tasks:
        if not above1:
            for t in ("auxiliary", "extremal"):
                if t in tasks:
                    out[t] = {"status": SKIPPED, "reason": "lambda <= lam1_q"}
        else:
            eps, c7 = auxiliary_constants(pr, mesh, th.lam1_q, lp.aux.get("eps"), lp.aux.get("c7"))
            if "auxiliary" in tasks:
                res = guarded("auxiliary", lambda: solve_auxiliary(pr, mesh, eps, c7, params, lam1_q=th.lam1_q))
                if res is not None:
                    rep, ver = res
                    out["auxiliary"] = {"status": "ok", "eps": eps, "c7": c7, "uniqueness": ver.to_dict(), **_rep_dict(rep)}
                    sols["aux_positive"] = rep.solution
    if "extremal" in tasks and above1:
        ext = {"status": "ok"}
        for sign, seed_name, name in ((1, "positive", "u_star"), (-1, "negative", "v_star")):
            if seed_name not in sols:
                ext[name] = {"status": SKIPPED, "reason": f"no {seed_name} seed"}
                continue
            rep = guarded("extremal", lambda: extremal_solution(pr, mesh, sols[seed_name], eps, c7, params,
                                                               lam1_q=th.lam1_q, sign=sign))
            if rep is None:
                break
            ext[name] = _rep_dict(rep)
            ext[name]["ordering"] = bool(rep.flags["ordering"])
            sols[name] = rep.solution
        if "extremal" not in out:
            out["extremal"] = ext
    if "nodal" in tasks:
        if not above2:
            out["nodal"] = {"status": SKIPPED, "reason": "lambda <= lam2_q"}
        elif "u_star" not in sols or "v_star" not in sols:
            out["nodal"] = {"status": SKIPPED, "reason": "extremal solutions unavailable"}
        else:
            rep = guarded("nodal", lambda: mountain_pass_nodal(pr, mesh, sols["u_star"], sols["v_star"], params,
                                                              lp.path_knots, gamma=th.second.path))
            if rep is not None:
                out["nodal"] = {"status": "ok", "found": bool(rep.flags["nodal_found"]), **_rep_dict(rep)}
                if rep.flags["nodal_found"]:
                    sols["nodal"] = rep.solution
    if "nonexistence" in tasks:
        scan = guarded("nonexistence", lambda: nonexistence_scan(pr, mesh, params, 16, q_pair=th.q_pair))
        if scan is not None:
            out["nonexistence"] = {"status": "ok", **scan.to_dict()}
    return out, sols, pr


def _dump(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_problem(config, out_dir=None, *, seed: int | None = None, threads: int | None = None) -> dict:
    """Solve one configured problem; writes nodal CSVs and ``summary.json`` to ``out_dir``."""
    lp = load_problem(config)
    if seed is not None or threads is not None:
        lp.params = replace(lp.params, seed=lp.params.seed if seed is None else seed,
                            threads=lp.params.threads if threads is None else threads)
    th = lp.thresholds()
    if lp.lam_cfg is None:
        raise ConfigError("lambda: missing")
    lam = lp.lam(th)
    outcomes, sols, pr = solve_tasks(lp, th, lam)
    report = check_hypotheses(pr, lp.mesh, lam1_p=th.lam1_p)
    nontrivial = [k for k in ("positive", "negative", "nodal") if k in sols]
    orderings = []
    ext = outcomes.get("extremal", {})
    for k in ("u_star", "v_star"):
        if isinstance(ext.get(k), dict) and "ordering" in ext[k]:
            orderings.append(ext[k]["ordering"])
    if "nodal" in outcomes and "ordering" in outcomes["nodal"].get("flags", {}):
        orderings.append(outcomes["nodal"]["flags"]["ordering"])
    summary = {
        "lambda": lam,
        "thresholds": th.to_dict(),
        "problem": {"p": lp.p, "q": lp.q, "a1": lp.a1.to_dict() if lp.a1.kind != "tabulated" else "tabulated",
                    "a2": lp.a2.to_dict() if lp.a2.kind != "tabulated" else "tabulated",
                    "f": pr.f.to_dict(), "dim": lp.mesh.dim, "n": lp.mesh.n},
        "seed": lp.params.seed,
        "hypotheses": report.to_dict(),
        "tasks": outcomes,
        "nontrivial_solutions": nontrivial,
        "ordering_ok": bool(orderings) and all(orderings),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, u in sols.items():
            write_csv(u, out / f"{name}.csv")
        summary["files"] = sorted(f"{name}.csv" for name in sols)
        _dump(summary, out / "summary.json")
    return summary


def run_eigen(config, r: float, out_dir=None, weight: str | None = None) -> dict:
    """Principal and second eigenvalue of the weighted r-Laplacian on the config's mesh."""
    lp = load_problem(config)
    if weight is None:
        weight = "a2" if r == lp.q else "a1"
    a = lp.a1 if weight == "a1" else lp.a2
    pair = principal_eigenpair(lp.mesh, r, a)
    second = second_eigenvalue(lp.mesh, r, a, lp.eigen_knots, principal=pair)
    res = {**pair.to_dict(), "weight": weight, "lambda_hat_2": second.lambda_hat_2,
           "lambda_hat_2_residual": second.residual_norm, "lambda_hat_2_dense_max": second.dense_max,
           "linear_oracle": second.linear_oracle}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(pair.eigenfunction, out / "eigen1.csv")
        write_csv(second.saddle, out / "eigen2.csv")
        _dump(res, out / "eigen.json")
    return res


# -- sweeps ------------------------------------------------------------------

@dataclass(eq=False)
class SweepSpec:
    problem: LoadedProblem
    grid: object
    tasks: tuple
    out: str | None


def load_sweep(cfg) -> SweepSpec:
    base = Path(".")
    if not isinstance(cfg, dict):
        path = Path(cfg)
        base = path.parent
        with open(path) as fh:
            cfg = json.load(fh)
    prob = _get(cfg, "problem", "", (dict, str))
    if isinstance(prob, str):
        lp = load_problem(base / prob)
    else:
        lp = load_problem(prob, base)
    grid = _get(cfg, "lambda", "")
    tasks = tuple(sorted(cfg.get("tasks", ("positive", "negative")), key=lambda t: _ORDER.get(t, -1)))
    if not tasks or any(t not in TASKS for t in tasks):
        raise ConfigError(f"tasks: unknown or empty {list(tasks)}")
    return SweepSpec(lp, grid, tasks, cfg.get("out"))


def sweep_grid(grid, th: Thresholds) -> list:
    if isinstance(grid, list):
        vals = [resolve_lambda(v, th) for v in grid]
    elif isinstance(grid, dict) and "values" in grid:
        vals = [resolve_lambda(v, th) for v in grid["values"]]
    elif isinstance(grid, dict):
        scale = _symbol(grid["relative_to"], th, "lambda.relative_to") if "relative_to" in grid else 1.0
        count = int(_get(grid, "count", "lambda."))
        lo, hi = float(_get(grid, "min", "lambda.")), float(_get(grid, "max", "lambda."))
        vals = list(scale * np.linspace(lo, hi, count)) if count > 1 else [scale * lo]
    else:
        raise ConfigError("lambda: expected list or object")
    vals = [float(v) for v in vals]
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError("lambda: grid must be strictly increasing")
    if any(v <= 0 for v in vals):
        raise ConfigError("lambda: must be positive")
    return vals


SWEEP_HEADER = ["lambda", "lam1_q", "lam2_q", "pos_found", "neg_found", "nodal_found",
                "pos_energy", "neg_energy", "nodal_energy", "pos_sup", "neg_sup", "nodal_sup",
                "pos_class", "neg_class", "nodal_class", "pos_iters", "neg_iters", "nodal_iters",
                "aux_uniqueness", "extremal_ordering", "nonexistence"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _row(lam: float, th: Thresholds, out: dict, tasks) -> dict:
    row = {"lambda": lam, "lam1_q": th.lam1_q, "lam2_q": th.lam2_q}
    for key, task in (("pos", "positive"), ("neg", "negative"), ("nodal", "nodal")):
        o = out.get(task)
        if task not in tasks:
            vals = dict.fromkeys(("found", "energy", "sup", "class", "iters"))
        elif o is None or o.get("status") != "ok":
            marker = SKIPPED if o is not None and o.get("status") == SKIPPED else "failed"
            vals = dict.fromkeys(("found", "energy", "sup", "class", "iters"), marker)
        else:
            vals = {"found": o["found"], "energy": o["energy"], "sup": o["sup_norm"],
                    "class": o["classification"], "iters": o["iterations"]}
        for k, v in vals.items():
            row[f"{key}_{k}"] = v
    aux = out.get("auxiliary")
    row["aux_uniqueness"] = (aux.get("uniqueness", {}).get("verdict", aux.get("status")) if aux else None)
    ext = out.get("extremal")
    if ext and ext.get("status") == "ok":
        flags = [ext[k]["ordering"] for k in ("u_star", "v_star") if isinstance(ext.get(k), dict) and "ordering" in ext[k]]
        row["extremal_ordering"] = bool(flags) and all(flags)
    else:
        row["extremal_ordering"] = ext.get("status") if ext else None
    non = out.get("nonexistence")
    row["nonexistence"] = non.get("verdict", non.get("status")) if non else None
    return row


def detect_threshold(lams, nontrivial) -> float | None:
    """Midpoint between the largest all-trivial lambda below the smallest nontrivial one and it."""
    idx = [i for i, flag in enumerate(nontrivial) if flag]
    if not idx or idx[0] == 0:
        return None
    first = idx[0]
    return 0.5 * (lams[first - 1] + lams[first])


def run_sweep(sweep, out_dir=None, *, seed: int | None = None, threads: int | None = None) -> dict:
    """One row per lambda; writes ``sweep.csv`` and ``sweep_summary.json``."""
    spec = load_sweep(sweep)
    lp = spec.problem
    params = lp.params
    if seed is not None:
        params = replace(params, seed=seed)
    k = threads if threads is not None else params.threads
    th = lp.thresholds()
    lams = sweep_grid(spec.grid, th)
    inner = replace(params, threads=1)

    def one(lam):
        out, sols, _ = solve_tasks(lp, th, lam, spec.tasks, inner)
        return out

    if k > 1:
        with ThreadPoolExecutor(max_workers=k) as pool:
            outs = list(pool.map(one, lams))
    else:
        outs = [one(lam) for lam in lams]
    rows = [_row(lam, th, o, spec.tasks) for lam, o in zip(lams, outs)]
    nontrivial = [r["pos_found"] is True or r["neg_found"] is True for r in rows]
    lam_c = detect_threshold(lams, nontrivial)
    monotone = all(not a or b for a, b in zip(nontrivial, nontrivial[1:]))
    steps = np.diff(lams)
    summary = {
        "thresholds": th.to_dict(),
        "lambda_c": lam_c,
        "lambda_c_error": None if lam_c is None else abs(lam_c - th.lam1_q),
        "grid_step": float(steps.max()) if steps.size else None,
        "monotone_transition": monotone,
        "rows": len(rows),
        "seed": params.seed,
        "tasks": list(spec.tasks),
        "hypotheses": check_hypotheses(lp.problem(th, lams[-1]), lp.mesh, lam1_p=th.lam1_p).to_dict(),
    }
    out_dir = out_dir if out_dir is not None else spec.out
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_HEADER)
            for r in rows:
                w.writerow([_fmt(r[h]) for h in SWEEP_HEADER])
        _dump(summary, out / "sweep_summary.json")
    summary["table"] = rows
    return summary
