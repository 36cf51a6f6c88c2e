import numpy as np
import pytest

from fairspace.measures import Measure


def uniform_disk(n, seed=0, center=(0.0, 0.0), radius=1.0):
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(0, 1, n))
    t = rng.uniform(0, 2 * np.pi, n)
    return Measure(np.c_[center[0] + r * np.cos(t), center[1] + r * np.sin(t)], np.full(n, 1.0 / n))


def symmetric_disk(n_per_copy, copies=3, seed=0):
    """Uniform disk sample made exactly invariant under rotation by 2pi/copies."""
    base = uniform_disk(n_per_copy, seed).points
    parts = []
    for k in range(copies):
        a = 2 * np.pi * k / copies
        R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
        parts.append(base @ R.T)
    pts = np.vstack(parts)
    return Measure(pts, np.full(len(pts), 1.0 / len(pts)))


def disk_mixture(rng, n=10_000, max_components=3):
    """Gaussian mixture conditioned on the unit disk (rejection sampling)."""
    k = int(rng.integers(1, max_components + 1))
    means = rng.uniform(-0.6, 0.6, (k, 2))
    sd = rng.uniform(0.1, 0.4, k)
    mix = rng.dirichlet(np.ones(k))
    out, have = [], 0
    while have < n:
        c = rng.choice(k, n, p=mix)
        p = means[c] + sd[c, None] * rng.standard_normal((n, 2))
        p = p[(p ** 2).sum(1) <= 1.0]
        out.append(p)
        have += len(p)
    pts = np.vstack(out)[:n]
    return Measure(pts, np.full(n, 1.0 / n))


def plane_mixture(rng, n=4000, max_components=3, spread=1.0):
    k = int(rng.integers(1, max_components + 1))
    means = rng.uniform(-spread, spread, (k, 2))
    sd = rng.uniform(0.15, 0.5, k)
    c = rng.integers(0, k, n)
    return Measure(means[c] + sd[c, None] * rng.standard_normal((n, 2)), np.full(n, 1.0 / n))


def uniform_square(n, seed=0, half=1.0):
    rng = np.random.default_rng(seed)
    return Measure(rng.uniform(-half, half, (n, 2)), np.full(n, 1.0 / n))


def cluster_line(rng, n=2000, clusters=3, sd=0.05):
    c = rng.uniform(0, 1, clusters)
    w = rng.dirichlet(np.ones(clusters))
    k = rng.choice(clusters, n, p=w)
    return Measure((c[k] + sd * rng.standard_normal(n))[:, None], np.full(n, 1.0 / n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fan_cones(angles):
    """Planar cones with apex 0 between consecutive boundary rays (counter-clockwise)."""
    from fairspace.geometry import ConvexCell, HalfSpace

    cones = []
    k = len(angles)
    for i in range(k):
        a, b = angles[i], angles[(i + 1) % k]
        ra, rb = (np.cos(a), np.sin(a)), (np.cos(b), np.sin(b))
        # left of ray a and right of ray b
        h1 = HalfSpace((-ra[1], ra[0]), 0.0, ">=")
        h2 = HalfSpace((rb[1], -rb[0]), 0.0, ">=")
        cones.append(ConvexCell(2, (h1, h2)))
    return cones


def thirds_fan(offset=np.pi / 2):
    return fan_cones([offset + 2 * np.pi * k / 3 for k in range(3)])


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> bool:
    ACCEPTANCE[criterion] = (bool(passed), detail)
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
