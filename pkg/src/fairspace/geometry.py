"""Halfspaces, convex cells, power diagrams and the join offset map."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "SLACK",
    "HalfSpace",
    "Ball",
    "ConvexCell",
    "PowerDiagramConfig",
    "power_cell",
    "power_cells",
    "power_labels",
    "join_offset",
    "contains",
    "ball_mask",
    "cell_to_dict",
    "cell_from_dict",
    "partition_to_dict",
    "partition_from_dict",
]

# membership slack for closed constraints
SLACK = 1e-12


@dataclass(frozen=True)


class HalfSpace:
    """``<y, normal> >= offset`` (sense ``>=``) or ``<= offset`` (sense ``<=``).

    ``offset`` may be infinite: ``H^+(-inf)`` is all of R^d and ``H^+(+inf)``
    is empty, symmetrically for ``<=``.
    """

    normal: tuple[float, ...]
    offset: float
    sense: str = ">="

    def __post_init__(self):
        if self.sense not in (">=", "<="):
            raise ValueError(f"bad sense {self.sense!r}")
        nrm = math.sqrt(sum(v * v for v in self.normal))
        if abs(nrm - 1.0) > 1e-12:
            raise ValueError(f"normal must be a unit vector (norm {nrm!r})")
        if math.isnan(self.offset):
            raise ValueError("offset is NaN")
        object.__setattr__(self, "normal", tuple(float(v) for v in self.normal))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def make(cls, normal, offset: float, sense: str = ">=") -> "HalfSpace":
        """Build from a non-unit normal, rescaling the offset to match."""
        v = np.asarray(normal, dtype=float)
        nrm = float(np.linalg.norm(v))
        if nrm == 0:
            raise ValueError("zero normal")
        v = v / nrm
        # renormalize once more so the unit check is met to the last ulp
        v = v / math.sqrt(float(v @ v))
        return cls(tuple(v.tolist()), offset / nrm if math.isfinite(offset) else offset, sense)

    @property
    def dim(self) -> int:
        return len(self.normal)

    def flipped(self) -> "HalfSpace":
        """The opposite closed halfspace sharing the boundary."""
        return HalfSpace(self.normal, self.offset, "<=" if self.sense == ">=" else ">=")

    def translated(self, x) -> "HalfSpace":
        if not math.isfinite(self.offset):
            return self
        return HalfSpace(self.normal, self.offset + float(np.dot(self.normal, x)), self.sense)

    def signed(self) -> tuple[np.ndarray, float]:
        """Equivalent ``<y, a> >= b`` form."""
        s = 1.0 if self.sense == ">=" else -1.0
        return s * np.asarray(self.normal), s * self.offset


@dataclass(frozen=True)


class Ball:
    """Closed Euclidean ball; used for the disk of the two-line space."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)


class ConvexCell:
    """Intersection of halfspaces (and optionally one ball).

    No constraints means the whole space.  Redundant constraints are kept.
    """

    dim: int
    constraints: tuple[HalfSpace, ...] = ()
    ball: Ball | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        cons = tuple(self.constraints)
        for h in cons:
            if h.dim != self.dim:
                raise ValueError(f"constraint of dim {h.dim} in a cell of dim {self.dim}")
        if self.ball is not None and len(self.ball.center) != self.dim:
            raise ValueError("ball dimension mismatch")
        object.__setattr__(self, "constraints", cons)

    @cached_property
    def _arrays(self):
        if not self.constraints:
            return np.zeros((0, self.dim)), np.zeros(0)
        A = np.empty((len(self.constraints), self.dim))
        b = np.empty(len(self.constraints))
        for k, h in enumerate(self.constraints):
            A[k], b[k] = h.signed()
        return A, b

    @property
    def is_empty_by_construction(self) -> bool:
        """True when some constraint is a limiting empty halfspace."""
        return any(
            (h.sense == ">=" and h.offset == math.inf) or (h.sense == "<=" and h.offset == -math.inf)
            for h in self.constraints
        )

    def _as_points(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[1] != self.dim:
            raise ValueError(f"points have dim {pts.shape[1]}, cell has dim {self.dim}")
        return pts

    def halfspace_mask(self, points: np.ndarray) -> np.ndarray:
        """Membership ignoring the ball."""
        pts = self._as_points(points)
        if self.is_empty_by_construction:
            return np.zeros(pts.shape[0], dtype=bool)
        inside = np.ones(pts.shape[0], dtype=bool)
        A, b = self._arrays
        for a, bk in zip(A, b):
            if bk == -math.inf:
                continue
            inside &= pts @ a >= bk - SLACK
        return inside

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        pts = self._as_points(points)
        inside = self.halfspace_mask(pts)
        if self.ball is not None:
            inside &= ball_mask(self.ball, pts)
        return inside

    def contains(self, y) -> bool:
        return bool(self.contains_points(np.asarray(y, dtype=float)[None, :])[0])

    def intersect(self, other: "ConvexCell") -> "ConvexCell":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        if self.ball is not None and other.ball is not None and self.ball != other.ball:
            raise ValueError("cannot intersect two different balls")
        return ConvexCell(self.dim, self.constraints + other.constraints, self.ball or other.ball)

    def with_constraint(self, h: HalfSpace) -> "ConvexCell":
        return ConvexCell(self.dim, self.constraints + (h,), self.ball)

    def translated(self, x) -> "ConvexCell":
        ball = None
        if self.ball is not None:
            ball = Ball(tuple(np.add(self.ball.center, x)), self.ball.radius)
        return ConvexCell(self.dim, tuple(h.translated(x) for h in self.constraints), ball)


def ball_mask(ball: Ball, points: np.ndarray) -> np.ndarray:
    d = points - np.asarray(ball.center)
    return np.einsum("ij,ij->i", d, d) <= ball.radius ** 2 + SLACK


def contains(cell: ConvexCell, y) -> bool:
    return cell.contains(y)


def join_offset(alpha: float) -> float:
    """``(2a - 1) / (1 - |2a - 1|)`` on [0, 1]; -inf at 0 and +inf at 1."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha={alpha!r} outside [0, 1]")
    if alpha == 0.0:
        return -math.inf
    if alpha == 1.0:
        return math.inf
    # the branch denominators 2a and 2(1-a) keep small alpha exact
    if alpha <= 0.5:
        return (2.0 * alpha - 1.0) / (2.0 * alpha)
    return (2.0 * alpha - 1.0) / (2.0 * (1.0 - alpha))


# -- power diagrams -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PowerDiagramConfig:
    """Sites and weights of a power diagram (weights summing to zero)."""

    sites: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        x = np.array(self.sites, dtype=float)
        lam = np.array(self.lambdas, dtype=float).reshape(-1)
        if x.ndim != 2 or x.shape[0] != lam.shape[0]:
            raise ValueError("need one weight per site")
        if x.shape[0] > 1:
            diff = x[:, None, :] - x[None, :, :]
            dist = np.sqrt((diff ** 2).sum(-1))
            dist[np.diag_indices(len(x))] = np.inf
            if dist.min() <= 1e-9:
                raise ValueError("duplicate sites")
        if abs(lam.sum()) > 1e-9 * max(1.0, np.abs(lam).max()):
            raise ValueError(f"weights must sum to zero (sum {lam.sum()!r})")
        x.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "sites", x)
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def centered(cls, sites, lambdas) -> "PowerDiagramConfig":
        lam = np.asarray(lambdas, dtype=float)
        return cls(sites, lam - lam.mean())

    @property
    def n(self) -> int:
        return self.sites.shape[0]

    @property
    def dim(self) -> int:
        return self.sites.shape[1]


def power_cell(config: PowerDiagramConfig, j: int) -> ConvexCell:
    """Cell ``j`` (0-based): points whose power distance to site j is minimal.

    For each i != j: ``<y, 2(x_i - x_j)> <= |x_i|^2 - |x_j|^2 - lam_i + lam_j``.
    """
    x, lam = config.sites, config.lambdas
    if not 0 <= j < config.n:
        raise IndexError(j)
    cons = []
    for i in range(config.n):
        if i == j:
            continue
        a = 2.0 * (x[i] - x[j])
        b = x[i] @ x[i] - x[j] @ x[j] - lam[i] + lam[j]
        cons.append(HalfSpace.make(a, b, "<="))
    return ConvexCell(config.dim, tuple(cons))


def power_cells(config: PowerDiagramConfig) -> list[ConvexCell]:
    return [power_cell(config, j) for j in range(config.n)]


def power_labels(points: np.ndarray, sites: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    """Index of the power cell of each point; ties go to the lower index."""
    pts = np.asarray(points, dtype=float)
    x = np.asarray(sites, dtype=float)
    # |y - x_i|^2 - lam_i up to the |y|^2 term shared by all i
    pw = (x * x).sum(1) - np.asarray(lambdas, dtype=float) - 2.0 * pts @ x.T
    return np.argmin(pw, axis=1)


# -- JSON ---------------------------------------------------------------------


def _offset_to_json(b: float):
    if b == math.inf:
        return "+inf"
    if b == -math.inf:
        return "-inf"
    return b


def _offset_from_json(b) -> float:
    if isinstance(b, str):
        if b in ("+inf", "inf"):
            return math.inf
        if b == "-inf":
            return -math.inf
        raise ValueError(f"bad offset {b!r}")
    return float(b)


def cell_to_dict(cell: ConvexCell) -> dict:
    d = {
        "constraints": [
            {"normal": list(h.normal), "offset": _offset_to_json(h.offset), "sense": h.sense}
            for h in cell.constraints
        ]
    }
    if cell.ball is not None:
        d["ball"] = {"center": list(cell.ball.center), "radius": cell.ball.radius}
    return d


def cell_from_dict(d: dict, dim: int) -> ConvexCell:
    cons = tuple(
        HalfSpace(tuple(c["normal"]), _offset_from_json(c["offset"]), c.get("sense", ">="))
        for c in d.get("constraints", [])
    )
    ball = None
    if d.get("ball") is not None:
        ball = Ball(tuple(d["ball"]["center"]), d["ball"]["radius"])
    return ConvexCell(dim, cons, ball)


def partition_to_dict(cells: Sequence[ConvexCell], provenance: dict | None = None) -> dict:
    if not cells:
        raise ValueError("empty partition")
    return {
        "dim": cells[0].dim,
        "cells": [cell_to_dict(c) for c in cells],
        "provenance": provenance or {},
    }


def partition_from_dict(d: dict) -> tuple[list[ConvexCell], dict]:
    dim = int(d["dim"])
    return [cell_from_dict(c, dim) for c in d["cells"]], d.get("provenance", {})
