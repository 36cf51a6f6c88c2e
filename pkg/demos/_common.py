"""Small helpers shared by the demo scripts."""
from pathlib import Path

import numpy as np

from fairspace.measures import Measure

OUT = Path(__file__).resolve().parent / "out"


def out_dir() -> Path:
    OUT.mkdir(exist_ok=True)
    return OUT


def disk_mixture(rng, n=10_000, k=2):
    """Gaussian mixture kept inside the unit disk by rejection."""
    means = rng.uniform(-0.6, 0.6, (k, 2))
    sd = rng.uniform(0.1, 0.35, k)
    pts = np.empty((0, 2))
    while len(pts) < n:
        c = rng.integers(0, k, n)
        p = means[c] + sd[c, None] * rng.standard_normal((n, 2))
        pts = np.vstack([pts, p[(p ** 2).sum(1) <= 1]])
    return Measure(pts[:n], np.full(n, 1.0 / n))


def blob(rng, center, sd=0.4, n=4000):
    return Measure(np.asarray(center) + sd * rng.standard_normal((n, 2)), np.full(n, 1.0 / n))
