# Closed loop: the arbiter drives the ego while traffic follows its own policies.
import sys
from collections import Counter

from scene_arbiter import load_scenario, run_episode
from scene_arbiter.episode import emit_outputs, replay

name = sys.argv[1] if len(sys.argv) > 1 else "pedestrian_crossing"
s = load_scenario(name)
trace = run_episode(s)

decisions = [t["result"]["selected"] for t in trace.ticks]
print(name, "ticks:", len(decisions), Counter(decisions))

# print the description whenever the decision changes
last = None
for t in trace.ticks:
    sel = t["result"]["selected"]
    if sel != last:
        print(f"\n[t={t['clock']:.1f} s] ego v={t['ego']['speed']:.2f} m/s")
        print(t["description"])
        last = sel

print("\nreplay mismatches:", len(replay(trace)))
files = emit_outputs(trace, f"out_{name}")
print("wrote", len(files), "files")
