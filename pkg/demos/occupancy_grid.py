# Ego-centric occupancy grid of a random-traffic scene, written as PGM.
import sys
from pathlib import Path

from scene_arbiter.grid import OCCUPIED, UNKNOWN, render_grid
from scene_arbiter.scenario import build_grid_spec, build_world, load_scenario

s = load_scenario("random_traffic")
world = build_world(s)
grid = render_grid(world, build_grid_spec(s))
print(grid.counts())

# coarse ASCII view: every 4th cell, forward is to the right
chars = {0: ".", OCCUPIED: "#", UNKNOWN: " "}
for row in grid.cells[::4]:
    print("".join(chars[int(c)] for c in row[::2]))

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("random_traffic.pgm")
grid.write_pgm(out)
print("wrote", out)
