"""Who is in front of me?  Enrol two colleagues, then answer an ID request.

Run with ``python demos/id_request.py``.
"""
# %% Enrol Ben and Carla from a handful of rendered face chips
from socialcue.cli import read_scenario_text
from socialcue.config import RunConfig
from socialcue.faceid import extract_descriptor, identify, normalize_face
from socialcue.pipeline import build_gallery, run_scenario
from socialcue.simulator import load_scenario, render_face
from socialcue.simulator.synth import identity_seed

scenario = load_scenario(read_scenario_text("id_request_mixed"))
gallery = build_gallery(scenario, RunConfig())
print(f"gallery: {sorted(gallery.names)}, rejection threshold {gallery.threshold:.3f}")

# %% Fresh renders of each person, plus a stranger
for name, seed in (("Ben", identity_seed("Ben")), ("Carla", identity_seed("Carla")), ("stranger", identity_seed(None, 2))):
    img, lm = render_face(seed, pose_seed=99)
    label, dist = identify(gallery, extract_descriptor(normalize_face(img, lm)))
    print(f"{name:9s} -> {label!s:12s} chi2 {dist:.3f}")

# %% The whole pipeline: the request at 2 s is answered left to right
result = run_scenario(scenario, "haptics")
print(result.event_log)
print(result.command_log)
print(result.report.to_table())
