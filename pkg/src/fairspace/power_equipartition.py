"""Equal-measure power diagrams.

Given a measure and n sites there are weights making every power cell carry
mass 1/n.  They maximize the concave dual functional

    Phi(lam) = sum_k w_k min_i (|y_k - x_i|^2 - lam_i) + mean(lam)

whose supergradient is ``1/n - mass(cell_i)``; we climb it with an adaptive
step that halves whenever a step fails to increase Phi.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ConvexCell, PowerDiagramConfig, power_cells
from .measures import Measure, cell_mass

__all__ = [
    "EqualizerNonConvergence",
    "EmpPoint",
    "equalize_weights",
    "emp_partition",
    "dual_objective",
    "labelled_masses",
]


class EqualizerNonConvergence(RuntimeError):
    """Raised with the best weights found when the mass target is missed."""

    def __init__(self, msg, best_lambdas, best_error):
        super().__init__(msg)
        self.best_lambdas = best_lambdas
        self.best_error = best_error


@dataclass(frozen=True, eq=False)


class EmpPoint:
    sites: np.ndarray
    lambdas: np.ndarray
    masses: np.ndarray
    tol: float
    iterations: int = 0
    phi_trace: tuple = field(default=(), repr=False)

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def max_error(self) -> float:
        return float(np.abs(self.masses - 1.0 / self.n).max())

    @property
    def config(self) -> PowerDiagramConfig:
        return PowerDiagramConfig.centered(self.sites, self.lambdas)


def _power(points, sites, lambdas):
    # |y - x_i|^2 - lam_i without the shared |y|^2 term
    return (sites * sites).sum(1) - lambdas - 2.0 * points @ sites.T


def labelled_masses(mu: Measure, sites, lambdas) -> np.ndarray:
    """Cell masses with each point counted once (ties to the lower index)."""
    sites = np.asarray(sites, dtype=float)
    lab = np.argmin(_power(mu.points, sites, np.asarray(lambdas, dtype=float)), axis=1)
    return np.bincount(lab, weights=mu.weights, minlength=len(sites))


def dual_objective(mu: Measure, sites, lambdas) -> float:
    sites = np.asarray(sites, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    sq = (mu.points * mu.points).sum(1)
    pw = _power(mu.points, sites, lam).min(axis=1) + sq
    return float(mu.weights @ pw + lam.mean())


def equalize_weights(mu: Measure, sites, tol: float = 1e-3, lambda0=None,
                     max_iter: int = 100_000, step0: float | None = None) -> EmpPoint:
    """Weights (summing to zero) whose power cells all carry mass ~1/n.

    ``tol`` is floored at twice the largest sample weight, since sampled
    masses move in quanta of single samples.
    """
    sites = np.asarray(sites, dtype=float)
    PowerDiagramConfig(sites, np.zeros(len(sites)))
    n = len(sites)
    if not tol > 0:
        raise ValueError("tol must be positive")
    tol = max(tol, 2.0 * mu.max_weight)
    target = 1.0 / n
    pts, w = mu.points, mu.weights
    sq_pts = (pts * pts).sum(1)
    sq_sites = (sites * sites).sum(1)
    cross = 2.0 * pts @ sites.T

    def state(lam):
        pw = sq_sites - lam - cross
        lab = np.argmin(pw, axis=1)
        masses = np.bincount(lab, weights=w, minlength=n)
        phi = float(w @ (pw[np.arange(len(lab)), lab] + sq_pts))
        return masses, phi

    lam = np.zeros(n) if lambda0 is None else np.array(lambda0, dtype=float)
    lam = lam - lam.mean()
    masses, phi = state(lam)
    if step0 is None:
        d2 = ((sites[:, None, :] - sites[None, :, :]) ** 2).sum(-1)
        step0 = float(d2.sum() / max(n - 1, 1))
    eta = step0
    trace = [phi]
    best_err, best_lam = np.abs(masses - target).max(), lam
    it = 0
    while it < max_iter:
        g = target - masses
        err = np.abs(g).max()
        if err < best_err:
            best_err, best_lam = err, lam
        if err <= tol:
            return EmpPoint(sites, lam, masses, tol, it, tuple(trace))
        it += 1
        trial = lam + eta * g
        trial -= trial.mean()
        m2, phi2 = state(trial)
        if phi2 >= phi:
            lam, masses, phi = trial, m2, phi2
            trace.append(phi)
            eta *= 1.5
        else:
            eta *= 0.5
            if eta < 1e-12 * step0:
                eta = step0 * 1e-3
    raise EqualizerNonConvergence(
        f"mass error {best_err:.3g} > tol {tol:.3g} after {max_iter} iterations",
        best_lam, best_err)


def emp_partition(emp: EmpPoint, mu: Measure | None = None) -> list[ConvexCell]:
    """Closed power cells of an equal-measure point; masses re-checked if ``mu`` given."""
    cells = power_cells(emp.config)
    if mu is not None:
        closed = np.array([cell_mass(mu, c) for c in cells])
        if np.any(closed < 1.0 / emp.n - emp.tol - 1e-12):
            raise AssertionError(f"closed cell masses {closed} fall below 1/n - tol")
    return cells
