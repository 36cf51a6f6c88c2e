"""Translate a fan of three 120-degree cones so the cones catch prescribed
shares (1/2, 1/4, 1/4) of a disk, then compare with a grid search."""
import numpy as np

from _common import out_dir
from fairspace.geometry import ConvexCell, HalfSpace
from fairspace.kkm_solver import SolveOptions, levi_oracle, solve_levi
from fairspace.measures import Measure
from fairspace.render import render_svg


def fan(angles):
    cones = []
    for a, b in zip(angles, np.roll(angles, -1)):
        cones.append(ConvexCell(2, (HalfSpace((-np.sin(a), np.cos(a)), 0.0, ">="),
                                    HalfSpace((np.sin(b), -np.cos(b)), 0.0, ">="))))
    return cones


rng = np.random.default_rng(0)
r, t = np.sqrt(rng.uniform(0, 1, 10_000)), rng.uniform(0, 2 * np.pi, 10_000)
disk = Measure(np.c_[r * np.cos(t), r * np.sin(t)], np.full(10_000, 1e-4))
cones = fan(np.pi / 2 + 2 * np.pi * np.arange(3) / 3)
alphas = [0.5, 0.25, 0.25]

x, assign, cert = solve_levi(cones, [disk] * 3, alphas, SolveOptions(stop_at=0.0))
_, grid = levi_oracle(cones, [disk] * 3, alphas, 32)
print("apex moved to", np.round(x, 4))
print("cone masses:", np.round(cert.value_table[0], 4), "targets:", alphas)
print(f"shortfall {cert.envy:.2e} (grid search: {grid:.2e})")

path = out_dir() / "levi.svg"
path.write_text(render_svg([c.translated(x) for c in cones], [disk], bbox=(-1.2, 1.2, -1.2, 1.2)))
print("wrote", path)
