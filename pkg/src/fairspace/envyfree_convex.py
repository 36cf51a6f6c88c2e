"""Simultaneous envy-free convex partitions via equal-measure power diagrams.

Sites are searched so that every group's stochastic matrix has equal row
sums; a nearly doubly stochastic matrix has a permutation inside its
positive support, and that permutation is the allocation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.optimize import minimize

from . import combinatorics as comb
from .geometry import ConvexCell, power_labels
from .measures import Measure, cell_mass, value_table
from .power_equipartition import EmpPoint, EqualizerNonConvergence, emp_partition, equalize_weights

__all__ = [
    "GroupInstance",
    "ConvexOptions",
    "EqualizerState",
    "g_matrix_envy",
    "g_matrix_threshold",
    "normalize_columns",
    "row_residual",
    "is_prime_power",
    "default_eps_schedule",
    "solve_simultaneous",
    "solve_group_allocation",
    "ConvexResult",
]


def is_prime_power(n: int) -> bool:
    if n < 2:
        return n == 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            while n % p == 0:
                n //= p
            return n == 1
        p += 1
    return True


def default_eps_schedule(steps: int = 6, start: float = 0.1) -> list[float]:
    return [start * 2.0 ** -m for m in range(steps)]


@dataclass(frozen=True, eq=False)


class GroupInstance:
    base_measure: Measure
    groups: tuple[tuple[Measure, ...], ...]
    n: int
    secretive: bool = False

    def __post_init__(self):
        groups = tuple(tuple(g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if self.n < 1:
            raise ValueError("n must be positive")
        size = self.n - 1 if self.secretive else self.n
        d = self.base_measure.dim
        for g in groups:
            if len(g) != size:
                raise ValueError(f"each group needs {size} measures, got {len(g)}")
            if any(mu.dim != d for mu in g):
                raise ValueError("group measure dimension differs from the base measure")

    @property
    def dim(self) -> int:
        return self.base_measure.dim


@dataclass(frozen=True)


class ConvexOptions:
    restarts: int = 8
    max_evals: int = 300
    seed: int = 0
    tol_mass: float = 1e-3
    tol_eq: float | None = None  # default 1e-3 * n
    simplex_size: float = 0.1

    def tol_eq_for(self, n: int) -> float:
        return 1e-3 * n if self.tol_eq is None else self.tol_eq


# -- matrices -----------------------------------------------------------------


def _values(partition_or_table, measures) -> np.ndarray:
    if isinstance(partition_or_table, np.ndarray):
        return partition_or_table
    return value_table(measures, partition_or_table)


def g_matrix_envy(partition, group_measures: Sequence[Measure], eps: float, n: int,
                  values: np.ndarray | None = None) -> np.ndarray:
    """``g[i, j] = max(0, mu_j(C_i) - (max_i' mu_j(C_i') - eps))``.

    With n-1 measures the last column is the constant 1/n of the hidden one.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    V = value_table(group_measures, partition) if values is None else np.asarray(values)
    k = V.shape[0]
    if k not in (n - 1, n) or V.shape[1] != n:
        raise ValueError("need n-1 or n measures over n cells")
    g = np.full((n, n), 1.0 / n)
    g[:, :k] = np.maximum(0.0, V - (V.max(axis=1, keepdims=True) - eps)).T
    return g


def g_matrix_threshold(partition, group_measures: Sequence[Measure], eps: float, m: int,
                       values: np.ndarray | None = None) -> np.ndarray:
    """``g[i, j] = max(0, mu_j(C_i) - (1/m - eps))`` for m cells and n measures."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    V = value_table(group_measures, partition) if values is None else np.asarray(values)
    if V.shape[1] != m:
        raise ValueError(f"need {m} cells")
    g = np.maximum(0.0, V - (1.0 / m - eps)).T
    if np.any(g.sum(axis=0) <= 0):
        raise ValueError("a measure has no cell above 1/m - eps (overlapping or lost mass)")
    return g


def normalize_columns(g, column_target: float = 1.0) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    s = g.sum(axis=0)
    if np.any(s <= 0):
        raise ValueError("zero column")
    return g * (column_target / s)


def row_residual(matrices: Sequence[np.ndarray]) -> float:
    """``sum_r sum_i (f_i^r - mean_r)^2`` over row sums ``f^r``."""
    total = 0.0
    for M in matrices:
        f = np.asarray(M).sum(axis=1)
        total += float(((f - f.mean()) ** 2).sum())
    return total


@dataclass(eq=False)


class EqualizerState:
    sites: np.ndarray
    emp: EmpPoint
    eps: float
    matrices: list[np.ndarray]
    residual: float
    values: list[np.ndarray] = field(default_factory=list)
    guide: float = 0.0


# -- search -------------------------------------------------------------------

GUIDE_WEIGHT = 1e-2


class _Evaluator:
    """Sites -> EqualizerState, warm-starting the equalizer from the last weights."""

    def __init__(self, instance: GroupInstance, cells: int, kind: str, opts: ConvexOptions):
        self.inst, self.cells, self.kind, self.opts = instance, cells, kind, opts
        self.lam = None

    def state(self, sites: np.ndarray, eps: float) -> EqualizerState | None:
        mu = self.inst.base_measure
        try:
            emp = equalize_weights(mu, sites, self.opts.tol_mass, lambda0=self.lam)
        except (ValueError, EqualizerNonConvergence):
            return None
        self.lam = emp.lambdas
        mats, vals, wide = [], [], []
        for g in self.inst.groups:
            V = np.empty((len(g), self.cells))
            for j, nu in enumerate(g):
                lab = power_labels(nu.points, sites, emp.lambdas)
                V[j] = np.bincount(lab, weights=nu.weights, minlength=self.cells)
            vals.append(V)
            if self.kind == "envy":
                gm = g_matrix_envy(None, g, eps, self.cells, values=V)
                mats.append(normalize_columns(gm, 1.0))
                wide.append(normalize_columns(g_matrix_envy(None, g, 1.0, self.cells, values=V)))
            else:
                target = self.cells / len(g)
                gm = np.maximum(0.0, V - (1.0 / self.cells - eps)).T
                if np.any(gm.sum(axis=0) <= 0):
                    return None
                mats.append(normalize_columns(gm, target))
                wide.append(normalize_columns(V.T + 1.0, target))
        return EqualizerState(np.array(sites), emp, eps, mats, row_residual(mats), vals,
                              row_residual(wide))


def _rotation(d: int, turn: float, seed: int) -> np.ndarray:
    """Planar rotation by ``pi * turn``; a seeded random orthogonal matrix for d > 2."""
    if turn == 0 or d == 1:
        return np.eye(d)
    if d == 2:
        a = np.pi * turn
        return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    q, r = np.linalg.qr(np.random.default_rng(seed).standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _initial_sites(mu: Measure, k: int, seed: int, turn: float = 0.0) -> np.ndarray:
    """k-means++ centers, rotated about the mean by ``turn`` (restart diversity)."""
    pts = mu.points
    if len(pts) > 4000:
        pts = pts[np.random.default_rng(seed).choice(len(pts), 4000, replace=False, p=mu.weights)]
    centers, _ = kmeans2(pts, k, minit="++", seed=seed)
    # kmeans2 can return coincident centers on tiny inputs
    jitter = np.random.default_rng(seed + 1).standard_normal(centers.shape) * 1e-6
    mean = np.average(mu.points, axis=0, weights=mu.weights)
    R = _rotation(mu.dim, turn, seed + 2)
    return (centers - mean) @ R.T + mean + jitter


def _ladder(eps: float) -> list[float]:
    """Coarser eps values visited first; the residual is much flatter at small eps."""
    out, e = [], 1.0
    while e > 1.5 * eps:
        out.append(e)
        e *= 0.5
    return out


def _search(ev: _Evaluator, eps: float, starts: list[tuple[np.ndarray, bool]], accept,
            opts: ConvexOptions, scale: float, tol_eq: float):
    """Nelder-Mead over flattened site tuples; stops at the first accepted state.

    Each start is ``(sites, warm)``; cold starts first descend an eps ladder.
    """
    k, d = starts[0][0].shape
    best: list = [np.inf, None]
    found: list = [None]
    trace = []

    class Done(Exception):
        pass

    def run(z0, e, target):
        stage = [np.inf, z0]

        def f(z):
            st = ev.state(z.reshape(k, d), e)
            if st is None:
                return 1e6
            # the eps-residual is flat where every column has one positive entry;
            # the wide-eps residual is smooth and breaks those ties
            v = st.residual + GUIDE_WEIGHT * st.guide
            if v < stage[0]:
                stage[0], stage[1] = v, z.copy()
            if target:
                trace.append(st.residual)
                if st.residual < best[0]:
                    best[0], best[1] = st.residual, st
                if st.residual <= tol_eq and accept(st):
                    found[0] = st
                    raise Done
            return v

        simplex = np.vstack([z0] + [z0 + h * e_ for e_ in np.eye(z0.size)])
        minimize(f, z0, method="Nelder-Mead",
                 options={"maxfev": opts.max_evals, "initial_simplex": simplex,
                          "xatol": 1e-10, "fatol": 0.0})
        return stage[1]

    h = opts.simplex_size * scale
    for x0, warm in starts:
        ev.lam = None
        z = x0.ravel()
        try:
            for e in ([] if warm else _ladder(eps)):
                z = run(z, e, False)
            run(z, eps, True)
        except Done:
            break
    return found[0], best[1], trace


@dataclass


class ConvexResult:
    cells: list[ConvexCell]
    state: EqualizerState | None
    permutations: list  # per group: list (full) or {excluded: list} (secretive) or [n]->[m] maps
    feasible: bool
    report: dict


def _eps_loop(instance, cells: int, kind: str, eps_schedule, opts: ConvexOptions, extract,
              tol_eq: float):
    mu = instance.base_measure
    scale = float(np.sqrt(np.average(((mu.points - np.average(mu.points, axis=0, weights=mu.weights)) ** 2)
                                     .sum(1), weights=mu.weights))) or 1.0
    ev = _Evaluator(instance, cells, kind, opts)
    # k-means++ starts tend to agree on one cut direction; spread them by rotation
    base_starts = [_initial_sites(mu, cells, opts.seed * 1000 + r, r / opts.restarts)
                   for r in range(opts.restarts)]
    prev = None
    steps, families = [], []
    last_ok = None
    best_any = None
    for eps in eps_schedule:
        starts = ([(prev.sites, True)] if prev is not None else []) + [(x, False) for x in base_starts]

        def accept(st, eps=eps):
            return extract(st) is not None

        ok, best, trace = _search(ev, eps, starts, accept, opts, scale, tol_eq)
        fam = extract(ok) if ok is not None else None
        steps.append({"eps": eps, "success": ok is not None,
                      "residual": float((ok or best).residual) if (ok or best) else None,
                      "evaluations": len(trace),
                      "residual_trace_min": float(min(trace)) if trace else None})
        if ok is not None:
            prev, last_ok = ok, (ok, fam)
            families.append(fam)
        else:
            prev = best if best is not None else prev
            if best is not None:
                best_any = best
            families.append(None)
    stable = len(families) >= 2 and families[-1] is not None and families[-1] == families[-2]
    return last_ok, best_any, steps, stable


def _support_ok(M: np.ndarray, perm) -> bool:
    return all(M[perm[j], j] > 0 for j in range(len(perm)))


def solve_simultaneous(instance: GroupInstance, eps_schedule: Sequence[float] | None = None,
                       opts: ConvexOptions = ConvexOptions()) -> ConvexResult:
    """EMP partition of the base measure envy-free (up to eps) for every group.

    Full groups get one permutation each (measure -> cell).  Secretive groups
    get, for every cell the hidden measure might prefer, a permutation that
    hands that cell to the hidden measure.
    """
    n = instance.n
    if n < 2:
        raise ValueError("n must be at least 2")
    eps_schedule = list(default_eps_schedule() if eps_schedule is None else eps_schedule)

    def extract(st: EqualizerState | None):
        if st is None:
            return None
        fam = []
        for M in st.matrices:
            if instance.secretive:
                per = {}
                for i in range(n):
                    try:
                        per[i] = comb.forced_column_permutation(M, i)
                    except ValueError:
                        return None
                fam.append(per)
            else:
                p = comb.support_permutation(M)
                if p is None:
                    return None
                fam.append(p)
        return fam

    last_ok, best, steps, stable = _eps_loop(instance, n, "envy", eps_schedule, opts, extract,
                                                 opts.tol_eq_for(n))
    report = {"n": n, "guaranteed": is_prime_power(n), "stable": stable, "steps": steps,
              "tol_eq": opts.tol_eq_for(n)}
    if last_ok is None:
        st = best
        cells = emp_partition(st.emp) if st is not None else []
        report["certificate"] = None
        return ConvexResult(cells, st, [], False, report)
    st, fam = last_ok
    cells = emp_partition(st.emp)
    cert = certify_simultaneous(instance, cells, fam, st.eps, opts.tol_mass)
    report["eps_final"] = st.eps
    report["matrices"] = [M.tolist() for M in st.matrices]
    report["certificate"] = cert
    return ConvexResult(cells, st, fam, cert["holds"], report)


def certify_simultaneous(instance: GroupInstance, cells, family, eps: float, tol_mass: float) -> dict:
    """Recheck every claimed inequality with closed cells."""
    n = instance.n
    base = np.array([cell_mass(instance.base_measure, c) for c in cells])
    mass_ok = bool(np.all(np.abs(base - 1.0 / n) <= tol_mass + 1e-12))
    checks = []
    for r, g in enumerate(instance.groups):
        V = value_table(g, cells)
        perms = family[r].values() if instance.secretive else [family[r]]
        for p in perms:
            for j in range(len(g)):
                checks.append(V[j, p[j]] >= V[j].max() - eps)
    return {"base_masses": base.tolist(), "mass_ok": mass_ok,
            "envy_ok": bool(all(checks)), "holds": mass_ok and bool(all(checks))}


def solve_group_allocation(mu: Measure, groups: Sequence[Sequence[Measure]], m: int,
                           eps_schedule: Sequence[float] | None = None,
                           opts: ConvexOptions = ConvexOptions()) -> ConvexResult:
    """m-cell EMP partition and maps [n] -> [m] with n/m measures per cell.

    Each measure's cell carries at least ``1/m - eps`` of it.
    """
    if m < 1:
        raise ValueError("m must be positive")
    n = len(groups[0])
    if n % m:
        raise ValueError(f"m={m} does not divide n={n}")
    eps_schedule = list(default_eps_schedule() if eps_schedule is None else eps_schedule)
    inst = GroupInstance(mu, tuple(tuple(g) for g in groups), n)
    if m == 1:
        cells = [ConvexCell(mu.dim)]
        maps = [[0] * n for _ in groups]
        return ConvexResult(cells, None, maps, True,
                            {"m": 1, "n": n, "steps": [], "eps_final": eps_schedule[-1],
                             "certificate": {"holds": True, "min_margin": 1.0}})

    def extract(st: EqualizerState | None):
        if st is None:
            return None
        maps = []
        for M in st.matrices:
            dev = float(np.abs(M.sum(axis=1) - 1.0).max())
            N = comb.stack_matrix(M, tol=max(1e-9, 2 * dev))
            sigma = comb.support_permutation(N)
            if sigma is None:
                return None
            maps.append([s % m for s in sigma])
        return maps

    ev_inst = _AllocInstance(mu, inst.groups, m)
    last_ok, best, steps, stable = _eps_loop(ev_inst, m, "threshold", eps_schedule, opts, extract,
                                                 opts.tol_eq_for(n))
    report = {"m": m, "n": n, "stable": stable, "steps": steps, "tol_eq": opts.tol_eq_for(n)}
    if last_ok is None:
        cells = emp_partition(best.emp) if best is not None else []
        report["certificate"] = None
        return ConvexResult(cells, best, [], False, report)
    st, maps = last_ok
    cells = emp_partition(st.emp)
    cert = certify_allocation(mu, groups, cells, maps, st.eps, opts.tol_mass)
    report["eps_final"] = st.eps
    report["matrices"] = [M.tolist() for M in st.matrices]
    report["certificate"] = cert
    return ConvexResult(cells, st, maps, cert["holds"], report)


@dataclass(frozen=True, eq=False)


class _AllocInstance:
    base_measure: Measure
    groups: tuple
    n: int  # number of cells
    secretive: bool = False


def certify_allocation(mu, groups, cells, maps, eps: float, tol_mass: float) -> dict:
    m = len(cells)
    base = np.array([cell_mass(mu, c) for c in cells])
    mass_ok = bool(np.all(np.abs(base - 1.0 / m) <= tol_mass + 1e-12))
    margins, sizes_ok = [], True
    for g, pi in zip(groups, maps):
        counts = np.bincount(pi, minlength=m)
        sizes_ok &= bool(np.all(counts == len(g) // m))
        V = value_table(g, cells)
        margins.extend(V[j, pi[j]] - (1.0 / m - eps) for j in range(len(g)))
    margin = float(min(margins))
    return {"base_masses": base.tolist(), "mass_ok": mass_ok, "sizes_ok": sizes_ok,
            "min_margin": margin, "holds": mass_ok and sizes_ok and margin >= 0}
