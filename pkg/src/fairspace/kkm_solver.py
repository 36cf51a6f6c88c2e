"""Search for envy-free points of Δ-spaces and of translated cone fans.

The existence results behind these searches are topological, so the solver
is a heuristic (multi-start Nelder-Mead on the simplex) paired with an exact
certificate recomputed from the returned partition.  An infeasible result is
a normal outcome and carries the best point found.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from . import combinatorics as comb
from .delta_spaces import DeltaSpace, barycentric_grid, evaluate, project_to_simplex
from .geometry import ConvexCell, HalfSpace
from .measures import Measure, value_table

__all__ = [
    "SolveOptions",
    "EnvyCertificate",
    "certify_envy",
    "envy_objective",
    "minimize_on_simplex",
    "solve_envy_free",
    "brute_force_oracle",
    "LeviSimplex",
    "levi_simplex",
    "levi_objective",
    "levi_certify",
    "levi_oracle",
    "solve_levi",
]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("FAIRSPACE_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)


class SolveOptions:
    """Search settings.

    ``max_evals`` is the objective budget of each restart.  The search stops
    early once the objective reaches ``stop_at`` (default: ``eps_mass``).
    """

    eps_mass: float = 1e-2
    restarts: int = 16
    max_evals: int = 400
    seed: int = 0
    mode: str = "full"
    seed_pool: int = 256
    simplex_size: float = 0.1
    seed_spacing: float = 0.05
    stop_at: float | None = None

    def __post_init__(self):
        if not self.eps_mass > 0:
            raise ValueError("eps_mass must be positive")
        if self.restarts < 1 or self.max_evals < 1:
            raise ValueError("restarts and max_evals must be positive")
        if self.mode not in ("full", "secretive"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def stop_value(self) -> float:
        return self.eps_mass if self.stop_at is None else self.stop_at


@dataclass


class EnvyCertificate:
    value_table: np.ndarray
    envy: float
    eps_used: float
    feasible: bool
    mode: str = "full"
    assignment: list[int] | None = None
    witnesses: dict[int, list[int]] | None = None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "value_table": np.asarray(self.value_table).tolist(),
            "assignment": self.assignment,
            "envy": float(self.envy),
            "eps": float(self.eps_used),
            "feasible": bool(self.feasible),
            "witnesses": None if self.witnesses is None
            else {str(k): v for k, v in sorted(self.witnesses.items())},
        }


def certify_envy(V, eps: float, mode: str = "full") -> EnvyCertificate:
    V = np.asarray(V, dtype=float)
    if mode == "full":
        perm, envy = comb.bottleneck_assignment(V)
        return EnvyCertificate(V, envy, eps, envy <= eps, mode, assignment=perm)
    envy = float(comb.secretive_deficits(V).max())
    ok, wit = comb.secretive_feasible(V, eps)
    return EnvyCertificate(V, envy, eps, ok, mode, witnesses=wit)


def _table_score(V: np.ndarray, mode: str) -> float:
    if mode == "full":
        return comb.bottleneck_value(comb.envy_matrix(V))
    # summed Hall deficiencies: smoother than the max for the search
    return float(comb.secretive_deficits(V).sum())


def envy_objective(space: DeltaSpace, measures: Sequence[Measure], mode: str = "full"
                   ) -> Callable[[np.ndarray], float]:
    def f(x):
        return _table_score(value_table(measures, evaluate(space, x)), mode)
    return f


def _check_arity(space: DeltaSpace, measures, mode: str) -> None:
    need = space.pieces if mode == "full" else space.pieces - 1
    if len(measures) != need:
        raise ValueError(f"{mode} mode needs {need} measures, got {len(measures)}")
    for mu in measures:
        if mu.dim != space.dim:
            raise ValueError(f"measure of dim {mu.dim} for a space of dim {space.dim}")


# -- generic simplex search ---------------------------------------------------


class _Stop(Exception):
    pass


def _seed_points(n: int, count: int, seed: int) -> np.ndarray:
    """Barycenter plus a scrambled Sobol set pushed onto the simplex."""
    pts = [np.full(n, 1.0 / n)]
    if n > 1 and count > 0:
        m = max(0, int(np.ceil(np.log2(count))))
        u = qmc.Sobol(d=n - 1, scramble=True, seed=seed).random_base2(m)[:count]
        u = np.sort(u, axis=1)
        pts.extend(np.diff(np.hstack([np.zeros((len(u), 1)), u, np.ones((len(u), 1))]), axis=1))
    return np.array(pts)


def _chart(y: np.ndarray) -> np.ndarray:
    return project_to_simplex(np.append(y, 1.0 - y.sum()))


def _lex_key(f: float, x: np.ndarray):
    return (f, tuple(np.round(x, 15)))


def minimize_on_simplex(f: Callable[[np.ndarray], float], n: int, opts: SolveOptions
                        ) -> tuple[np.ndarray, float, dict]:
    """Multi-start Nelder-Mead over the simplex.

    Seeds are ranked by objective; restart k starts from the k-th best, so
    adding restarts never makes the answer worse.  Proposals leaving the
    simplex are projected back.
    """
    seeds = _seed_points(n, opts.seed_pool, opts.seed)
    if n == 1:
        x = np.ones(1)
        return x, float(f(x)), {"evals": 1, "restarts": 0}
    vals = np.array([f(s) for s in seeds])
    order = sorted(range(len(seeds)), key=lambda k: _lex_key(vals[k], seeds[k]))
    # best seeds first, skipping near-duplicates so restarts explore
    starts: list[np.ndarray] = []
    for k in order:
        if all(np.abs(seeds[k] - x).max() >= opts.seed_spacing for x in starts):
            starts.append(seeds[k])
        if len(starts) == opts.restarts:
            break
    info = {"evals": len(seeds), "restarts": 0, "seed_best": float(vals[order[0]])}

    def run(x0):
        best = [float(f(x0)), x0]
        count = [1]

        def g(y):
            x = _chart(y)
            v = float(f(x))
            count[0] += 1
            if _lex_key(v, x) < _lex_key(*best):
                best[0], best[1] = v, x
            if v <= opts.stop_value:
                raise _Stop
            return v

        if best[0] > opts.stop_value:
            y0 = x0[:-1]
            h = opts.simplex_size
            simplex = np.vstack([y0] + [y0 + h * e for e in np.eye(n - 1)])
            try:
                minimize(g, y0, method="Nelder-Mead",
                         options={"maxfev": opts.max_evals, "initial_simplex": simplex,
                                  "xatol": 1e-9, "fatol": 0.0})
            except _Stop:
                pass
        return best[0], best[1], count[0]

    workers = min(worker_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = []
        for x0 in starts:
            results.append(run(x0))
            if results[-1][0] <= opts.stop_value:
                break
    # same merge either way: scan in restart order, stop at the first hit
    best_f, best_x = vals[order[0]], seeds[order[0]]
    for k, (v, x, c) in enumerate(results):
        info["evals"] += c
        info["restarts"] = k + 1
        if _lex_key(v, x) < _lex_key(best_f, best_x):
            best_f, best_x = v, x
        if v <= opts.stop_value:
            break
    return np.asarray(best_x), float(best_f), info


# -- Δ-space envy-free search -------------------------------------------------


def solve_envy_free(space: DeltaSpace, measures: Sequence[Measure], opts: SolveOptions = SolveOptions()
                    ) -> tuple[np.ndarray, list[ConvexCell], EnvyCertificate]:
    """Point of the simplex whose partition is (nearly) envy-free.

    Full mode needs one measure per piece; secretive mode one fewer, and the
    certificate then holds whichever piece the missing measure prefers.
    """
    _check_arity(space, measures, opts.mode)
    f = envy_objective(space, measures, opts.mode)
    x, _, _ = minimize_on_simplex(f, space.pieces, opts)
    cells = evaluate(space, x)
    cert = certify_envy(value_table(measures, cells), opts.eps_mass, opts.mode)
    return x, cells, cert


def brute_force_oracle(space: DeltaSpace, measures: Sequence[Measure], resolution: int,
                       mode: str | None = None) -> tuple[np.ndarray, float]:
    """Grid minimizer of the envy objective over ``{k / resolution}`` points."""
    if resolution < 1:
        raise ValueError("resolution must be positive")
    if space.pieces > 4 and resolution >= 32:
        raise ValueError("oracle budget: at most 4 pieces at resolution >= 32")
    if mode is None:
        mode = "full" if len(measures) == space.pieces else "secretive"
    _check_arity(space, measures, mode)
    f = envy_objective(space, measures, mode)
    best_x, best_v = None, np.inf
    for x in barycentric_grid(space.pieces, resolution):
        v = f(x)
        if v < best_v:
            best_x, best_v = x, v
    if mode == "secretive":
        best_v = float(comb.secretive_deficits(value_table(measures, evaluate(space, best_x))).max())
    return best_x, float(best_v)


# -- translated cone fans -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class LeviSimplex:
    """Search simplex: ``<y, normals[i]> >= offsets[i]`` for all i; vertex i opposite facet i."""

    normals: np.ndarray
    offsets: np.ndarray
    vertices: np.ndarray

    def point(self, t) -> np.ndarray:
        return np.asarray(t, dtype=float) @ self.vertices


def _outward(h: HalfSpace) -> np.ndarray:
    n = np.asarray(h.normal)
    return -n if h.sense == ">=" else n


def check_fan(cones: Sequence[ConvexCell], probes: int = 2000, seed: int = 0) -> None:
    d = cones[0].dim
    if len(cones) != d + 1:
        raise ValueError(f"need d+1 = {d + 1} cones, got {len(cones)}")
    for c in cones:
        if c.dim != d or c.ball is not None:
            raise ValueError("cones must be halfspace cells of a common dimension")
        if any(abs(h.offset) > 1e-12 for h in c.constraints) or not c.constraints:
            raise ValueError("cone constraints must pass through the origin")
    rays = np.random.default_rng(seed).standard_normal((probes, d))
    rays /= np.linalg.norm(rays, axis=1, keepdims=True)
    covered = np.zeros(probes, dtype=bool)
    for c in cones:
        covered |= c.contains_points(rays)
    if not covered.all():
        raise ValueError(f"cones miss {int((~covered).sum())} of {probes} probe rays")


def levi_simplex(cones: Sequence[ConvexCell], measures: Sequence[Measure], alphas,
                 max_doublings: int = 60, refine_steps: int = 30) -> LeviSimplex:
    """Halfspaces ``G_i^-`` containing translates of the cones with little mass.

    ``H_i^- = {<y, w_i> <= 0}`` contains cone i when ``w_i`` is a sum of the
    cone's outward normals.  Each is pushed outward (doubling, then bisection)
    until every measure gives it mass below ``alpha_i``; the simplex is the
    intersection of the opposite halfspaces.
    """
    d = cones[0].dim
    W = np.empty((d + 1, d))
    for i, c in enumerate(cones):
        outs = [_outward(h) for h in c.constraints]
        w = np.sum(outs, axis=0)
        if np.linalg.norm(w) < 1e-9:
            w = outs[0]
        W[i] = w / np.linalg.norm(w)

    def light(i, s):
        return all(mu.weights[mu.points @ W[i] <= -s].sum() < alphas[i] for mu in measures)

    offsets = np.empty(d + 1)
    for i in range(d + 1):
        s = 2.0 ** -10
        for _ in range(max_doublings):
            if light(i, s):
                break
            s *= 2.0
        else:
            raise RuntimeError(f"cannot push mass of halfspace {i} below alpha")
        lo, hi = s / 2.0, s
        for _ in range(refine_steps):
            mid = 0.5 * (lo + hi)
            if light(i, mid):
                hi = mid
            else:
                lo = mid
        offsets[i] = -hi
    verts = np.empty((d + 1, d))
    for i in range(d + 1):
        keep = [k for k in range(d + 1) if k != i]
        try:
            verts[i] = np.linalg.solve(W[keep], offsets[keep])
        except np.linalg.LinAlgError as exc:
            raise ValueError("cone normals do not bound a simplex") from exc
        if verts[i] @ W[i] <= offsets[i]:
            raise ValueError("cone normals do not bound a simplex")
    return LeviSimplex(W, offsets, verts)


def _levi_deficits(cones, measures, alphas, x) -> np.ndarray:
    cells = [c.translated(x) for c in cones]
    V = value_table(measures, cells)
    return np.maximum(np.asarray(alphas)[None, :] - V, 0.0), V


def levi_objective(cones, measures, alphas, simplex: LeviSimplex, mode: str = "full"):
    k = len(cones)

    def f(t):
        D, _ = _levi_deficits(cones, measures, alphas, simplex.point(t))
        if mode == "full":
            return comb.bottleneck_value(D)
        return float(sum(comb.bottleneck_value(np.delete(D, i, axis=1)) for i in range(k)))
    return f


def levi_certify(cones, measures, alphas, x, eps: float, mode: str = "full") -> EnvyCertificate:
    D, V = _levi_deficits(cones, measures, alphas, x)
    k = len(cones)
    if mode == "full":
        perm, worst = comb.bottleneck_permutation(D)
        return EnvyCertificate(V, worst, eps, worst <= eps, mode, assignment=perm)
    wit, worst = {}, 0.0
    for i in range(k):
        keep = [c for c in range(k) if c != i]
        perm, v = comb.bottleneck_permutation(D[:, keep])
        worst = max(worst, v)
        if v <= eps:
            wit[i] = [keep[p] for p in perm]
    return EnvyCertificate(V, worst, eps, worst <= eps, mode, witnesses=wit)


def _levi_setup(cones, measures, alphas, mode):
    alphas = np.asarray(alphas, dtype=float)
    check_fan(cones)
    d = cones[0].dim
    need = d + 1 if mode == "full" else d
    if len(measures) != need:
        raise ValueError(f"{mode} mode needs {need} measures, got {len(measures)}")
    if len(alphas) != d + 1 or np.any(alphas <= 0) or abs(alphas.sum() - 1) > 1e-9:
        raise ValueError("alphas must be d+1 positive numbers summing to 1")
    return alphas, levi_simplex(cones, measures, alphas)


def solve_levi(cones: Sequence[ConvexCell], measures: Sequence[Measure], alphas,
               opts: SolveOptions = SolveOptions()):
    """Translate x with ``mu_{pi(i)}(x + C_i) >= alpha_i - eps`` for every cone.

    Returns ``(x, assignment-or-witnesses, certificate)``.
    """
    alphas, simplex = _levi_setup(cones, measures, alphas, opts.mode)
    f = levi_objective(cones, measures, alphas, simplex, opts.mode)
    t, _, _ = minimize_on_simplex(f, len(cones), opts)
    x = simplex.point(t)
    cert = levi_certify(cones, measures, alphas, x, opts.eps_mass, opts.mode)
    return x, (cert.assignment if opts.mode == "full" else cert.witnesses), cert


def levi_oracle(cones, measures, alphas, resolution: int, mode: str = "full"):
    """Grid minimum of the Levi objective over the search simplex."""
    alphas, simplex = _levi_setup(cones, measures, alphas, mode)
    f = levi_objective(cones, measures, alphas, simplex, mode)
    best_t, best_v = None, np.inf
    for t in barycentric_grid(len(cones), resolution):
        v = f(t)
        if v < best_v:
            best_t, best_v = t, v
    return simplex.point(best_t), float(best_v)
