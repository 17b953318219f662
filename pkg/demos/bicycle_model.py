# Single-track kinematics: circles, closure, and what sampled traffic looks like.
import math

import numpy as np

from scene_arbiter.kinematics import (ControlBounds, ControlInput, KinematicState, RandomSource,
                                      sample_controls, step_single_track)

L, delta, v, dt = 2.7, 0.2, 8.0, 0.1
r = L / math.tan(delta)
print(f"turn radius L/tan(delta) = {r:.3f} m")

s = KinematicState(0.0, 0.0, 0.0, v, L)
xs, ys = [s.x], [s.y]
for _ in range(300):
    s = step_single_track(s, ControlInput(delta, 0.0), dt)
    xs.append(s.x)
    ys.append(s.y)
xs, ys = np.array(xs), np.array(ys)
print("max distance from circle:", np.abs(np.hypot(xs, ys - r) - r).max())

# braking never reverses the car
s = KinematicState(0.0, 0.0, 0.0, 3.0, L)
for _ in range(20):
    s = step_single_track(s, ControlInput(0.0, -4.0), dt)
print(f"after hard braking: x = {s.x:.3f} m, v = {s.speed}")

# uniformly sampled steering rates and target speeds, reproducible by seed
bounds = ControlBounds()
for seed in (1, 1, 2):
    c = sample_controls(RandomSource(seed), bounds, 50)
    print(f"seed {seed}: target speed {c.target_speeds[0]:.3f} m/s, "
          f"steering range [{c.steering.min():+.3f}, {c.steering.max():+.3f}] rad")
