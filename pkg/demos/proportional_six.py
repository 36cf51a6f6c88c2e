"""Six players, six convex cells, each worth about 1/6 to its owner.

Six is not a prime power, so the plane is first split 3 ways with two
players per cell, and every cell is then split 2 ways.
"""
import numpy as np

from _common import blob, out_dir
from fairspace.proportional import solve_proportional
from fairspace.render import render_svg

rng = np.random.default_rng(2024)
base = blob(rng, (0.0, 0.0), 1.0)
players = [blob(rng, rng.uniform(-1, 1, 2), 0.5) for _ in range(6)]
res = solve_proportional(base, [players], 6, eps_total=0.05)

cert = res.certificate
print("feasible:", res.feasible)
print("factor tree:", res.tree.m, "x", res.tree.s)
print("assigned masses:", np.round(cert["masses"][0], 3))
print(f"composed guarantee {cert['composed_bound']:.4f}, ideal 1/6 = {1 / 6:.4f}")

path = out_dir() / "proportional.svg"
path.write_text(render_svg(res.cells, players, {c: f"p{i}" for i, c in enumerate(res.maps[0])}))
print("wrote", path)
