"""Split the plane into three convex cells of equal base mass so that three
players each get a cell they value most (up to eps).

The cells are a power diagram; the search moves the sites while the weights
keep the base masses equal.  Writes demos/out/convex.svg.
"""
import numpy as np

from _common import blob, out_dir
from fairspace.envyfree_convex import GroupInstance, solve_simultaneous
from fairspace.measures import value_table
from fairspace.render import render_svg

rng = np.random.default_rng(3)
base = blob(rng, (0.0, 0.0), 1.0, 6000)
players = [blob(rng, c) for c in [(-1.2, -0.8), (1.3, -0.6), (0.1, 1.2)]]
res = solve_simultaneous(GroupInstance(base, [players], 3))

print("feasible:", res.feasible, " eps reached:", res.report.get("eps_final"))
print("base masses:", np.round(res.report["certificate"]["base_masses"], 4))
V = value_table(players, res.cells)
perm = res.permutations[0]
for j, cell in enumerate(perm):
    print(f"  player {j} -> cell {cell}: value {V[j, cell]:.3f} (best {V[j].max():.3f})")

path = out_dir() / "convex.svg"
path.write_text(render_svg(res.cells, [base] + players, {c: f"player {j}" for j, c in enumerate(perm)}))
print("wrote", path)
