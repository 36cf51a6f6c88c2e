"""Partition families parametrized by the simplex.

A Δ-space maps a barycentric point ``x`` of the (n-1)-simplex to an ordered
partition into n convex cells such that ``x[i] == 0`` forces cell ``i`` to be
null and masses move continuously with ``x``.  Spaces are trees: leaves are
the trivial one-piece partition, the two-chord disk partition and power
diagrams with fixed sites; internal nodes join two spaces along a direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Sequence, Union

import numpy as np

from .geometry import (
    Ball,
    ConvexCell,
    HalfSpace,
    PowerDiagramConfig,
    join_offset,
    power_cells,
)

__all__ = [
    "CalibrationError",
    "Trivial",
    "TwoLineDisk",
    "PowerFixedSites",
    "Join",
    "DeltaSpace",
    "as_simplex_point",
    "project_to_simplex",
    "barycentric_grid",
    "evaluate",
    "two_line_partition",
    "power_fixed_sites_partition",
    "power_fixed_weights",
    "calibrate_M",
    "nested_space",
    "interval_space",
    "space_to_dict",
    "space_from_dict",
]

SIMPLEX_TOL = 1e-12
CALIBRATION_MARGIN = 1e-6


class CalibrationError(RuntimeError):
    pass


# -- simplex helpers ----------------------------------------------------------


def as_simplex_point(x, n: int | None = None) -> np.ndarray:
    p = np.asarray(x, dtype=float).reshape(-1)
    if n is not None and p.shape[0] != n:
        raise ValueError(f"expected {n} barycentric coordinates, got {p.shape[0]}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"not a point of the simplex: {p}")
    return p


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum x = 1}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    x = np.maximum(v - theta, 0.0)
    return x / x.sum()


def barycentric_grid(n: int, resolution: int) -> Iterator[np.ndarray]:
    """All points of the simplex with coordinates in ``{k / resolution}``."""
    # stars and bars: choose n-1 bar positions among resolution + n - 1 slots
    for bars in combinations(range(resolution + n - 1), n - 1):
        counts = np.diff((-1,) + bars + (resolution + n - 1,)) - 1
        yield counts / resolution


# -- space nodes --------------------------------------------------------------


@dataclass(frozen=True)
class Trivial:
    """The one-piece partition ``{R^d}``."""

    dim: int

    @property
    def pieces(self) -> int:
        return 1


@dataclass(frozen=True)


class TwoLineDisk:
    """Four pieces of a disk cut by two chords (plane only)."""

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if len(self.center) != 2:
            raise ValueError("two-line partitions live in the plane")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self) -> int:
        return 2

    @property
    def pieces(self) -> int:
        return 4


@dataclass(frozen=True, eq=False)


class PowerFixedSites:
    """Power diagrams on fixed sites with weights ``M - n M x``."""

    sites: np.ndarray
    M: float

    def __post_init__(self):
        s = np.array(self.sites, dtype=float)
        if s.ndim != 2 or s.shape[0] < 2:
            raise ValueError("need at least two sites")
        if not self.M < 0:
            raise ValueError("M must be negative")
        PowerDiagramConfig(s, np.zeros(len(s)))  # duplicate-site check
        s.setflags(write=False)
        object.__setattr__(self, "sites", s)

    @property
    def dim(self) -> int:
        return self.sites.shape[1]

    @property
    def pieces(self) -> int:
        return self.sites.shape[0]


@dataclass(frozen=True)


class Join:
    """``left *_v right``: left pieces on ``<y,v> >= beta``, right pieces on ``<= beta``."""

    left: "DeltaSpace"
    right: "DeltaSpace"
    direction: tuple[float, ...]

    def __post_init__(self):
        v = np.asarray(self.direction, dtype=float)
        if self.left.dim != self.right.dim or len(v) != self.left.dim:
            raise ValueError("join operands and direction must share a dimension")
        nrm = float(np.linalg.norm(v))
        if nrm == 0:
            raise ValueError("zero direction")
        v = v / nrm
        object.__setattr__(self, "direction", tuple((v / math.sqrt(float(v @ v))).tolist()))

    @property
    def dim(self) -> int:
        return self.left.dim

    @property
    def pieces(self) -> int:
        return self.left.pieces + self.right.pieces


DeltaSpace = Union[Trivial, TwoLineDisk, PowerFixedSites, Join]


# -- evaluation ---------------------------------------------------------------


def _block(x: np.ndarray) -> np.ndarray:
    s = x.sum()
    if s <= 0:
        return np.full(len(x), 1.0 / len(x))
    return x / s


def evaluate(space: DeltaSpace, x) -> list[ConvexCell]:
    x = as_simplex_point(x, space.pieces)
    return _evaluate(space, x)


def _evaluate(space: DeltaSpace, x: np.ndarray) -> list[ConvexCell]:
    if isinstance(space, Trivial):
        return [ConvexCell(space.dim)]
    if isinstance(space, TwoLineDisk):
        return two_line_partition(x, space.center, space.radius)
    if isinstance(space, PowerFixedSites):
        return power_fixed_sites_partition(space.sites, x, space.M)
    if isinstance(space, Join):
        nl = space.left.pieces
        xl, xr = x[:nl], x[nl:]
        sl, sr = xl.sum(), xr.sum()
        if sl <= 0:
            alpha = 1.0
        elif sr <= 0:
            alpha = 0.0
        else:
            alpha = min(max(sr / (sl + sr), 0.0), 1.0)
        beta = join_offset(alpha)
        upper = HalfSpace(space.direction, beta, ">=")
        lower = HalfSpace(space.direction, beta, "<=")
        left = [c.with_constraint(upper) for c in _evaluate(space.left, _block(xl))]
        right = [c.with_constraint(lower) for c in _evaluate(space.right, _block(xr))]
        return left + right
    raise TypeError(f"not a delta space: {space!r}")


def _chord_side(center, radius: float, start: float, length: float) -> HalfSpace:
    """Closed side of the chord cutting off the arc ``[start, start + length]``.

    The chord is ``<y - c, u> = r cos(length / 2)`` with ``u`` pointing at the
    arc midpoint, which stays well defined when the endpoints coincide
    (length 0 gives the single arc point, length 2*pi the whole disk).
    """
    mid = start + 0.5 * length
    u = np.array([math.cos(mid), math.sin(mid)])
    u = u / math.sqrt(float(u @ u))
    offset = float(u @ np.asarray(center)) + radius * math.cos(0.5 * length)
    return HalfSpace(tuple(u.tolist()), offset, ">=")


def two_line_partition(x, center=(0.0, 0.0), radius: float = 1.0) -> list[ConvexCell]:
    """Disk pieces cut by chords p0p2 and p1p3.

    ``p_k`` sits at angle ``2*pi*(x_1 + ... + x_k)``; piece i is the region
    holding the arc from ``p_{i-1}`` to ``p_i`` (arc length ``2*pi*x_i``).
    """
    x = as_simplex_point(x, 4)
    tau = 2.0 * math.pi
    ang = tau * np.concatenate(([0.0], np.cumsum(x[:3])))
    ball = Ball(tuple(center), radius)
    # chord p0p2: arc p0 -> p2 holds pieces 1, 2; chord p1p3: arc p1 -> p3 holds 2, 3
    a02 = _chord_side(center, radius, ang[0], tau * (x[0] + x[1]))
    a13 = _chord_side(center, radius, ang[1], tau * (x[1] + x[2]))
    a20, a31 = a02.flipped(), a13.flipped()
    sides = [(a02, a31), (a02, a13), (a20, a13), (a20, a31)]
    return [ConvexCell(2, s, ball) for s in sides]


def power_fixed_weights(x, M: float) -> np.ndarray:
    """``lambda_i = M - n M x_i``: zero sum, ``lambda_i = M`` on the face ``x_i = 0``."""
    x = np.asarray(x, dtype=float)
    return M - len(x) * M * x


def power_fixed_sites_partition(sites, x, M: float) -> list[ConvexCell]:
    if not M < 0:
        raise ValueError("M must be negative")
    sites = np.asarray(sites, dtype=float)
    x = as_simplex_point(x, len(sites))
    lam = power_fixed_weights(x, M)
    return power_cells(PowerDiagramConfig.centered(sites, lam))


# -- calibration of M ---------------------------------------------------------


def _face_bound_ok(sites: np.ndarray, measures, eps: float, absM: float) -> bool:
    # With lambda_i = M and the others summing to -M, some k has
    # lambda_k >= |M| / (n-1), so cell i lies in the union over k of
    # {2<y, x_k - x_i> <= |x_k|^2 - |x_i|^2 - |M| n / (n-1)}.
    n = len(sites)
    sq = (sites * sites).sum(1)
    shift = absM * n / (n - 1)
    for mu in measures:
        proj = mu.points @ sites.T
        for i in range(n):
            hit = np.zeros(len(mu), dtype=bool)
            for k in range(n):
                if k != i:
                    hit |= 2.0 * (proj[:, k] - proj[:, i]) <= sq[k] - sq[i] - shift
            if mu.weights[hit].sum() >= eps:
                return False
    return True


def _vertex_ok(sites: np.ndarray, measures, eps: float, absM: float) -> bool:
    n = len(sites)
    for k in range(n):
        x = np.zeros(n)
        x[k] = 1.0
        cells = power_fixed_sites_partition(sites, x, -absM)
        for mu in measures:
            for i in range(n):
                if i != k and mu.mass(cells[i]) >= eps:
                    return False
    return True


def calibrate_M(sites, measures, eps: float, rule: str = "face", max_doublings: int = 60,
                refine_steps: int = 40) -> float:
    """Negative M such that a cell with weight M has mass < eps for every measure.

    ``rule="face"`` certifies the bound on the whole face ``x_i = 0`` through
    a union-of-halfspaces envelope; ``rule="vertices"`` only checks the n
    vertex configurations.  |M| is doubled from 1 until the check passes,
    then bisected inside the last doubling step.
    """
    sites = np.asarray(sites, dtype=float)
    n = len(sites)
    if n < 2:
        raise ValueError("need at least two sites")
    if not 0 < eps < 1.0 / n:
        raise ValueError(f"eps must lie in (0, 1/n) = (0, {1.0 / n})")
    PowerDiagramConfig(sites, np.zeros(n))
    check = {"face": _face_bound_ok, "vertices": _vertex_ok}[rule]

    hi = 1.0
    for _ in range(max_doublings):
        if check(sites, measures, eps, hi):
            break
        hi *= 2.0
    else:
        raise CalibrationError(f"no M found after {max_doublings} doublings")
    if hi == 1.0:
        return -1.0
    lo = hi / 2.0
    for _ in range(refine_steps):
        mid = 0.5 * (lo + hi)
        if check(sites, measures, eps, mid):
            hi = mid
        else:
            lo = mid
    # the check is monotone in |M|; the margin keeps samples that sit on the
    # bisected boundary clear of rounding differences in the cell arithmetic
    return -hi * (1.0 + CALIBRATION_MARGIN)


# -- builders -----------------------------------------------------------------


def nested_space(dim: int, cuts: Sequence[tuple[Sequence[float], int]]) -> DeltaSpace:
    """Nested hyperplane partitions with fixed directions.

    Start from ``{R^d}``; each ``(direction, j)`` cuts the current piece ``j``
    (0-based) by a hyperplane orthogonal to ``direction``.  The two halves take
    positions j and j+1.
    """
    leaves: list[list[int]] = [[]]  # path (0 = left, 1 = right) to every piece

    tree: DeltaSpace = Trivial(dim)

    def replace(node, path, new):
        if not path:
            return new
        if path[0] == 0:
            return Join(replace(node.left, path[1:], new), node.right, node.direction)
        return Join(node.left, replace(node.right, path[1:], new), node.direction)

    for direction, j in cuts:
        if not 0 <= j < len(leaves):
            raise IndexError(f"cut index {j} with {len(leaves)} pieces")
        path = leaves[j]
        tree = replace(tree, path, Join(Trivial(dim), Trivial(dim), tuple(direction)))
        leaves[j:j + 1] = [path + [0], path + [1]]
    return tree


def interval_space(n: int, dim: int = 1) -> DeltaSpace:
    """n pieces cut along the first axis (a chain of joins)."""
    e1 = tuple(1.0 if k == 0 else 0.0 for k in range(dim))
    space: DeltaSpace = Trivial(dim)
    for _ in range(n - 1):
        space = Join(space, Trivial(dim), e1)
    return space


# -- JSON ---------------------------------------------------------------------


def space_to_dict(space: DeltaSpace) -> dict:
    if isinstance(space, Trivial):
        return {"kind": "trivial", "dim": space.dim}
    if isinstance(space, TwoLineDisk):
        return {"kind": "two-line-disk", "center": list(space.center), "radius": space.radius}
    if isinstance(space, PowerFixedSites):
        return {"kind": "power-fixed", "sites": space.sites.tolist(), "M": space.M}
    if isinstance(space, Join):
        return {
            "kind": "join",
            "direction": list(space.direction),
            "left": space_to_dict(space.left),
            "right": space_to_dict(space.right),
        }
    raise TypeError(space)


def space_from_dict(d: dict, dim: int | None = None) -> DeltaSpace:
    kind = d.get("kind")
    if kind == "trivial":
        dd = d.get("dim", dim)
        if dd is None:
            raise ValueError("trivial space needs a dimension")
        return Trivial(int(dd))
    if kind == "two-line-disk":
        return TwoLineDisk(tuple(d.get("center", (0.0, 0.0))), float(d.get("radius", 1.0)))
    if kind == "power-fixed":
        return PowerFixedSites(np.asarray(d["sites"], dtype=float), float(d["M"]))
    if kind == "join":
        direction = tuple(d["direction"])
        return Join(space_from_dict(d["left"], len(direction)),
                    space_from_dict(d["right"], len(direction)), direction)
    raise ValueError(f"unknown space kind {kind!r}")
