"""Cut a disk with two chords so four guests can share it without envy,
knowing only three of them.

The fourth guest's preferences are never used, yet for each piece they
might grab, the other three can still be seated on pieces they like best
(up to eps).  Writes demos/out/two_lines.svg.
"""
import numpy as np

from _common import disk_mixture, out_dir
from fairspace.delta_spaces import TwoLineDisk
from fairspace.kkm_solver import SolveOptions, solve_envy_free
from fairspace.render import render_svg

rng = np.random.default_rng(7)
guests = [disk_mixture(rng) for _ in range(3)]
x, cells, cert = solve_envy_free(TwoLineDisk(), guests, SolveOptions(mode="secretive", eps_mass=1e-2))

print("arc fractions:", np.round(x, 4))
print("value table (rows = known guests, cols = pieces):")
print(np.round(cert.value_table, 3))
for hidden, seats in sorted(cert.witnesses.items()):
    print(f"  if the unknown guest takes piece {hidden}: known guests get pieces {seats}")
print("feasible:", cert.feasible, " worst slack:", f"{cert.envy:.2e}")

labels = {i: f"{cert.value_table[:, i].round(2).tolist()}" for i in range(4)}
path = out_dir() / "two_lines.svg"
path.write_text(render_svg(cells, guests, labels))
print("wrote", path)
