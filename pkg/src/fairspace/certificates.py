"""Self-contained certificates: inequality claims checked against a partition.

A certificate lists the measures it talks about (by position), the value
table the solver saw, and claims of three kinds:

- ``ge_max_minus``: ``V[j, i] >= max_k V[j, k] - eps``
- ``ge_const``: ``V[j, i] >= bound``
- ``mass_eq``: ``|V[j, i] - target| <= tol``

Checking needs only the cells and the measures, no solver code.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .geometry import ConvexCell
from .measures import Measure, value_table

__all__ = ["envy_claims", "bound_claims", "mass_claims", "make_certificate", "check_certificate",
           "ArityError"]

# stored and recomputed value tables must agree to this
TABLE_TOL = 1e-9


class ArityError(ValueError):
    pass


def envy_claims(assignment: Sequence[int], eps: float, measure_ids: Sequence[int] | None = None) -> list[dict]:
    ids = list(range(len(assignment))) if measure_ids is None else list(measure_ids)
    return [{"type": "ge_max_minus", "measure": int(ids[j]), "cell": int(c), "eps": float(eps)}
            for j, c in enumerate(assignment)]


def bound_claims(assignment: Sequence[int], bounds, measure_ids: Sequence[int] | None = None) -> list[dict]:
    ids = list(range(len(assignment))) if measure_ids is None else list(measure_ids)
    b = np.broadcast_to(np.asarray(bounds, dtype=float), (len(assignment),))
    return [{"type": "ge_const", "measure": int(ids[j]), "cell": int(c), "bound": float(b[j])}
            for j, c in enumerate(assignment)]


def mass_claims(measure: int, cells: int, target: float, tol: float) -> list[dict]:
    return [{"type": "mass_eq", "measure": int(measure), "cell": i, "target": float(target),
             "tol": float(tol)} for i in range(cells)]


def _dedupe(claims: list[dict]) -> list[dict]:
    seen, out = set(), []
    for c in claims:
        key = tuple(sorted(c.items()))
        if key not in seen:
            seen.add(key)
            out.append(c)
    return out


def make_certificate(kind: str, measures: Sequence[Measure], cells: Sequence[ConvexCell],
                     claims: list[dict], feasible: bool, eps: float, extra: dict | None = None,
                     labels: Sequence[str] | None = None) -> dict:
    V = value_table(measures, cells)
    cert = {
        "kind": kind,
        "n_measures": len(measures),
        "measure_labels": list(labels) if labels is not None else [f"m{j}" for j in range(len(measures))],
        "eps": float(eps),
        "feasible": bool(feasible),
        "value_table": V.tolist(),
        "claims": _dedupe(claims),
    }
    if extra:
        cert.update(extra)
    return cert


def check_certificate(cert: dict, cells: Sequence[ConvexCell], measures: Sequence[Measure]) -> list[str]:
    """Violated claims as readable strings (empty list: everything holds)."""
    if len(measures) != cert["n_measures"]:
        raise ArityError(f"certificate covers {cert['n_measures']} measures, got {len(measures)}")
    V = value_table(measures, cells)
    bad = []
    stored = np.asarray(cert.get("value_table", V), dtype=float)
    if stored.shape != V.shape or np.abs(stored - V).max(initial=0.0) > TABLE_TOL:
        bad.append("stored value_table differs from the recomputed one")
    if not cert.get("feasible", False):
        bad.append("certificate is marked infeasible")
    for c in cert["claims"]:
        j, i = c["measure"], c["cell"]
        if not (0 <= j < V.shape[0] and 0 <= i < V.shape[1]):
            bad.append(f"claim refers to measure {j} / cell {i} outside the table")
            continue
        v = V[j, i]
        if c["type"] == "ge_max_minus":
            if v < V[j].max() - c["eps"]:
                bad.append(f"measure {j}: cell {i} has {v:.6g} < max {V[j].max():.6g} - {c['eps']:.3g}")
        elif c["type"] == "ge_const":
            if v < c["bound"]:
                bad.append(f"measure {j}: cell {i} has {v:.6g} < {c['bound']:.6g}")
        elif c["type"] == "mass_eq":
            if abs(v - c["target"]) > c["tol"]:
                bad.append(f"measure {j}: cell {i} has {v:.6g}, not {c['target']:.6g} +- {c['tol']:.3g}")
        else:
            bad.append(f"unknown claim type {c['type']!r}")
    return bad
