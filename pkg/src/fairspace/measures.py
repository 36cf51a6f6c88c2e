"""Discrete probability measures on R^d.

Every fairness quantity in the package reduces to masses of convex cells,
and those are computed here.  A ``Measure`` is a finite weighted sample
standing in for an absolutely continuous measure.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import ConvexCell, ball_mask

__all__ = [
    "DegenerateSpecError",
    "RestrictionError",
    "Measure",
    "MeasureSpec",
    "realize",
    "cell_mass",
    "restrict",
    "value_table",
    "measure_from_dict",
    "measure_to_dict",
    "load_measure",
    "save_measure",
]

WEIGHT_SUM_TOL = 1e-12


class DegenerateSpecError(ValueError):
    """A measure spec with no positive mass."""


class RestrictionError(ValueError):
    """Restricting a measure to a cell of zero mass."""


@dataclass(frozen=True, eq=False)


class Measure:
    """Weighted point sample; ``weights`` sum to one.

    ``root_mass`` is the mass this measure had inside its parent before
    renormalization (1.0 for measures that were never restricted).
    """

    points: np.ndarray
    weights: np.ndarray
    root_mass: float = 1.0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.array(self.weights, dtype=float).reshape(-1)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a measure needs at least one point")
        if w.shape[0] != pts.shape[0]:
            raise ValueError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_unnormalized(cls, points, weights=None, root_mass: float = 1.0) -> "Measure":
        pts = np.asarray(points, dtype=float)
        if weights is None:
            weights = np.ones(len(pts))
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not total > 0:
            raise DegenerateSpecError("total mass is zero")
        return cls(pts, w / total, root_mass)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def max_weight(self) -> float:
        return float(self.weights.max())

    def mass(self, cell: ConvexCell) -> float:
        return cell_mass(self, cell)


@dataclass(frozen=True)


class MeasureSpec:
    """Recipe for a measure.

    kind ``points``: ``points`` (+ optional ``weights``).
    kind ``grid``: ``origin``, ``spacing`` (one per axis), ``values`` (a
    d-dimensional array; entry ``values[i0, i1, ...]`` is the mass of the grid
    cell whose lower corner is ``origin + i * spacing``).
    kind ``gaussian-mixture``: ``components`` as (mean, diagonal covariance,
    mixture weight) triples, ``sample_count`` and ``seed``.
    """

    kind: str
    points: Sequence | None = None
    weights: Sequence | None = None
    origin: Sequence[float] | None = None
    spacing: Sequence[float] | None = None
    values: Sequence | None = None
    components: Sequence | None = None
    sample_count: int = 1000
    seed: int = 0

    def validate(self) -> None:
        if self.kind == "points":
            if self.points is None or len(self.points) == 0:
                raise ValueError("points spec without points")
        elif self.kind == "grid":
            vals = np.asarray(self.values, dtype=float)
            if np.any(vals < 0):
                raise ValueError("grid values must be nonnegative")
            if vals.size == 0 or not np.any(vals > 0):
                raise DegenerateSpecError("grid values are all zero")
            d = vals.ndim
            if len(self.origin) != d or len(self.spacing) != d:
                raise ValueError("origin/spacing length must match the grid dimension")
            if any(s <= 0 for s in self.spacing):
                raise ValueError("grid spacing must be positive")
        elif self.kind == "gaussian-mixture":
            if not self.components:
                raise ValueError("mixture without components")
            mix = np.array([c[2] for c in self.components], dtype=float)
            if np.any(mix < 0) or abs(mix.sum() - 1.0) > 1e-9:
                raise ValueError("mixture weights must be >= 0 and sum to 1")
            for mean, cov, _ in self.components:
                if len(cov) != len(mean) or any(c <= 0 for c in cov):
                    raise ValueError("covariance diagonal must be positive, one entry per axis")
            if self.sample_count <= 0:
                raise ValueError("sample_count must be positive")
        else:
            raise ValueError(f"unknown measure kind {self.kind!r}")


def realize(spec: MeasureSpec) -> Measure:
    """Turn a spec into a concrete weighted sample (deterministic in ``seed``)."""
    spec.validate()
    if spec.kind == "points":
        return Measure.from_unnormalized(spec.points, spec.weights)

    if spec.kind == "grid":
        vals = np.asarray(spec.values, dtype=float)
        origin = np.asarray(spec.origin, dtype=float)
        spacing = np.asarray(spec.spacing, dtype=float)
        idx = np.argwhere(vals > 0)
        centers = origin + (idx + 0.5) * spacing
        return Measure.from_unnormalized(centers, vals[tuple(idx.T)])

    rng = np.random.default_rng(spec.seed)
    means = np.array([c[0] for c in spec.components], dtype=float)
    sds = np.sqrt(np.array([c[1] for c in spec.components], dtype=float))
    mix = np.array([c[2] for c in spec.components], dtype=float)
    comp = rng.choice(len(mix), size=spec.sample_count, p=mix / mix.sum())
    pts = means[comp] + sds[comp] * rng.standard_normal((spec.sample_count, means.shape[1]))
    return Measure(pts, np.full(spec.sample_count, 1.0 / spec.sample_count))


def cell_mass(mu: Measure, cell: ConvexCell) -> float:
    """Mass of a closed convex cell; points on the boundary count."""
    if cell.dim != mu.dim:
        raise ValueError(f"cell has dim {cell.dim}, measure has dim {mu.dim}")
    return float(mu.weights[cell.contains_points(mu.points)].sum())


def restrict(mu: Measure, cell: ConvexCell) -> Measure:
    """Conditional measure ``mu( . | cell)``."""
    if cell.dim != mu.dim:
        raise ValueError(f"cell has dim {cell.dim}, measure has dim {mu.dim}")
    inside = cell.contains_points(mu.points)
    mass = float(mu.weights[inside].sum())
    if not mass > 0:
        raise RestrictionError("measure has zero mass inside the cell")
    if inside.all():
        return Measure(mu.points, mu.weights, mu.root_mass)
    return Measure(mu.points[inside], mu.weights[inside] / mass, mu.root_mass * mass)


def value_table(measures: Sequence[Measure], cells: Sequence[ConvexCell]) -> np.ndarray:
    """``V[j, i] = measures[j](cells[i])``."""
    V = np.empty((len(measures), len(cells)))
    for j, mu in enumerate(measures):
        balls = {}  # cells usually share one ball; test it once per measure
        for i, c in enumerate(cells):
            if c.dim != mu.dim:
                raise ValueError(f"cell has dim {c.dim}, measure has dim {mu.dim}")
            inside = c.halfspace_mask(mu.points)
            if c.ball is not None:
                if c.ball not in balls:
                    balls[c.ball] = ball_mask(c.ball, mu.points)
                inside &= balls[c.ball]
            V[j, i] = mu.weights[inside].sum()
    return V


# -- JSON -------------------------------------------------------------------


def measure_to_dict(mu: Measure) -> dict:
    return {
        "kind": "points",
        "dim": mu.dim,
        "points": mu.points.tolist(),
        "weights": mu.weights.tolist(),
    }


def spec_from_dict(d: dict) -> MeasureSpec:
    kind = d.get("kind")
    if kind == "points":
        return MeasureSpec("points", points=d["points"], weights=d.get("weights"))
    if kind == "grid":
        return MeasureSpec("grid", origin=d["origin"], spacing=d["spacing"], values=d["values"])
    if kind == "gaussian-mixture":
        comps = [(c["mean"], c["cov"], c["weight"]) for c in d["components"]]
        return MeasureSpec("gaussian-mixture", components=comps,
                           sample_count=int(d["sample_count"]), seed=int(d.get("seed", 0)))
    raise ValueError(f"unknown measure kind {kind!r}")


def measure_from_dict(d: dict) -> Measure:
    mu = realize(spec_from_dict(d))
    if "dim" in d and int(d["dim"]) != mu.dim:
        raise ValueError(f"declared dim {d['dim']} but points have dim {mu.dim}")
    return mu


def load_measure(path) -> Measure:
    with open(path) as fh:
        return measure_from_dict(json.load(fh))


def save_measure(mu: Measure, path) -> None:
    with open(path, "w") as fh:
        json.dump(measure_to_dict(mu), fh)
