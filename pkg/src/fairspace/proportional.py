"""Proportional convex partitions for any number of pieces.

Non-prime-power n is factored as n = m * s with m the largest prime-power
divisor.  An m-cell allocation hands s measures (per group) to each cell,
and each cell is split recursively among its s measures.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

from .envyfree_convex import (
    ConvexOptions,
    GroupInstance,
    solve_group_allocation,
    solve_simultaneous,
)
from .geometry import ConvexCell, cell_to_dict
from .measures import Measure, cell_mass, restrict

__all__ = [
    "prime_power_factor",
    "recursion_depth",
    "RecursionNode",
    "ProportionalResult",
    "solve_proportional",
]


# summed sample weights carry rounding at this scale
MASS_ROUNDING = 1e-12


def _factorize(n: int) -> dict[int, int]:
    out, p = {}, 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def prime_power_factor(n: int) -> tuple[int, int] | None:
    """``(m, s)`` with m the largest prime-power divisor, or None for prime powers and 1."""
    if n < 1:
        raise ValueError("n must be positive")
    f = _factorize(n)
    if len(f) <= 1:
        return None
    # prime powers of distinct primes never coincide, so the max is unique
    m = max(p ** k for p, k in f.items())
    return m, n // m


def recursion_depth(n: int) -> int:
    """Number of solver levels below the root (1 for prime powers, 0 for n=1)."""
    if n == 1:
        return 0
    f = prime_power_factor(n)
    return 1 if f is None else 1 + recursion_depth(f[1])


@dataclass
class RecursionNode:
    n: int
    m: int
    s: int
    eps: float
    region: ConvexCell
    cells: list[ConvexCell] = field(default_factory=list)
    maps: list[list[int]] = field(default_factory=list)  # per group, local measure -> local cell
    children: list["RecursionNode"] = field(default_factory=list)
    feasible: bool = True
    report: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "m": self.m, "s": self.s, "eps": self.eps,
            "feasible": self.feasible,
            "maps": self.maps,
            "cells": [cell_to_dict(c) for c in self.cells],
            "certificate": self.report.get("certificate"),
            "children": [c.to_dict() for c in self.children],
        }


@dataclass
class ProportionalResult:
    cells: list[ConvexCell]
    maps: list[list[int]]  # per group, measure -> index of its D cell
    feasible: bool
    certificate: dict
    tree: RecursionNode


def _leaf(mu, groups, n, eps, opts, region) -> tuple[RecursionNode, list[ConvexCell], list[list[int]]]:
    node = RecursionNode(n, n, 1, eps, region)
    if n == 1:
        node.cells = [region]
        node.maps = [[0] for _ in groups]
        return node, [region], node.maps
    res = solve_simultaneous(GroupInstance(mu, tuple(tuple(g) for g in groups), n),
                             [4 * eps, 2 * eps, eps], opts)
    node.cells, node.maps, node.feasible = res.cells, [list(p) for p in res.permutations], res.feasible
    node.report = res.report
    node.eps = res.report.get("eps_final", eps)
    if not res.feasible:
        return node, [], []
    return node, [region.intersect(c) for c in res.cells], node.maps


def _solve(mu: Measure, groups, n: int, eps: float, opts: ConvexOptions, region: ConvexCell):
    f = prime_power_factor(n)
    if f is None:
        return _leaf(mu, groups, n, eps, opts, region)
    m, s = f
    res = solve_group_allocation(mu, groups, m, [4 * eps, 2 * eps, eps], opts)
    node = RecursionNode(n, m, s, res.report.get("eps_final", eps), region,
                         res.cells, [list(p) for p in res.permutations] if res.feasible else [],
                         feasible=res.feasible, report=res.report)
    if not res.feasible:
        return node, [], []
    cells: list[ConvexCell] = []
    maps = [[-1] * n for _ in groups]
    for j, C in enumerate(res.cells):
        sub_region = region.intersect(C)
        # S_j^r: the s measures of group r sent to cell j, in index order
        blocks = [[i for i in range(n) if pi[i] == j] for pi in res.permutations]
        sub_mu = restrict(mu, C)
        sub_groups = [[restrict(g[i], C) for i in blk] for g, blk in zip(groups, blocks)]
        sub_opts = dataclasses.replace(opts, seed=opts.seed * 31 + j + 1)
        child, sub_cells, sub_maps = _solve(sub_mu, sub_groups, s, eps, sub_opts, sub_region)
        node.children.append(child)
        if not child.feasible:
            node.feasible = False
            return node, [], []
        cells.extend(sub_cells)
        for r, blk in enumerate(blocks):
            for p, i in enumerate(blk):
                maps[r][i] = s * j + sub_maps[r][p]
    return node, cells, maps


def _node_bound(node: RecursionNode) -> float:
    """Worst relative share guaranteed along any root-to-leaf path."""
    own = 1.0 / node.m - node.eps if node.n > 1 else 1.0
    if not node.children:
        return own
    return own * min(_node_bound(c) for c in node.children)


def solve_proportional(mu: Measure, groups: Sequence[Sequence[Measure]], n: int,
                       eps_total: float = 0.05, opts: ConvexOptions = ConvexOptions()
                       ) -> ProportionalResult:
    """Convex n-partition giving each group measure a cell worth about 1/n of it.

    The tolerance budget is split evenly across recursion levels; the
    certificate reports the composed bound and the masses actually achieved.
    """
    if n < 1:
        raise ValueError("n must be positive")
    groups = [list(g) for g in groups]
    for g in groups:
        if len(g) != n:
            raise ValueError(f"each group needs {n} measures, got {len(g)}")
    depth = max(recursion_depth(n), 1)
    eps = eps_total / depth
    root = ConvexCell(mu.dim)
    tree, cells, maps = _solve(mu, groups, n, eps, opts, root)
    if not tree.feasible:
        return ProportionalResult([], [], False, {"holds": False, "reason": "a level failed"}, tree)
    bound = _node_bound(tree)
    masses = [[cell_mass(g[i], cells[pi[i]]) for i in range(n)] for g, pi in zip(groups, maps)]
    counts_ok = all(sorted(pi) == list(range(n)) for pi in maps)
    low = float(min(min(row) for row in masses))
    cert = {
        "n": n,
        "depth": depth,
        "eps_level": eps,
        "composed_bound": bound,
        "ideal_bound": 1.0 / n - eps_total,
        "masses": masses,
        "min_mass": low,
        "bijective": counts_ok,
        "base_mass_total": float(sum(cell_mass(mu, c) for c in cells)),
        "holds": bool(counts_ok and low >= bound - MASS_ROUNDING),
    }
    return ProportionalResult(cells, maps, cert["holds"], cert, tree)
