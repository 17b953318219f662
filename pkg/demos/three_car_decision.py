# Three cars around the ego on a three-lane road: which behavior, and why.
from scene_arbiter import load_scenario, run_episode
from scene_arbiter.episode import arbitrate_snapshot
from scene_arbiter.links import internal_significance
from scene_arbiter.scenario import build_task, build_world

s = load_scenario("fig5_three_car")
world = build_world(s)
task = build_task(s)

# pinned table: probabilities and impact times come straight from the fixture
out = arbitrate_snapshot(s, world, task)
for oid, obj in out.important.items():
    print(oid, obj.relation.value, obj.band.value, "lambda =", internal_significance(out.links)[oid])

print()
print("object   behavior         p     tau    theta  counter")
for e in out.threats:
    tau = "inf" if e.impact_time == float("inf") else f"{e.impact_time:5.1f}"
    print(f"{e.object_id:8s} {e.behavior.value:16s} {e.probability:4.2f}  {tau:>5s}  {e.threat:5.3f}  {e.counter.value}")

print()
print(out.result.description.render())

# same scene, but every impact time simulated instead of pinned
sim = arbitrate_snapshot(s, world, task, use_pinned=False)
print()
print("simulated active cells:")
for e in sim.threats:
    if e.active:
        print(f"  {e.object_id}/{e.behavior.value}: tau = {e.impact_time:.1f} s")
print("selected:", sim.result.selected.value)

# a trace is plain JSON lines; the header carries the config hash
trace = run_episode(s)
print()
print("config hash", trace.header["config_hash"][:16], "...")
