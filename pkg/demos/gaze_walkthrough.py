"""Follow one colleague's glance from landmarks to the spoken cue.

Run with ``python demos/gaze_walkthrough.py``.
"""
# %% A single scripted person at -30 deg who turns to the wearer at about 1.3 s
from socialcue.arbiter import Arbiter, Variant
from socialcue.attention import Attention, EventKind
from socialcue.faceid import IdentityLabel
from socialcue.headpose import bearing_of, classify_yaw, default_face_model, solve_pose
from socialcue.logs import format_command
from socialcue.simulator import load_scenario, synthesize_observations

scenario = load_scenario("""
duration 3000
noise 0.5
participant Anna
  t=0 bearing=-30 distance=1200 yaw=40
  t=1000 bearing=-30 distance=1200 yaw=40
  t=1300 bearing=-30 distance=1200 yaw=-30
""")
model = default_face_model()
cam = scenario.camera
print(f"camera {cam.width}x{cam.height}, {cam.fov_h:.0f} deg field")

# %% Head pose and bearing every 200 ms
for t in range(0, 2001, 200):
    obs = synthesize_observations(scenario, t, seed=7, model=model)[0]
    pose = solve_pose(obs, model, cam)
    beta = bearing_of(obs, cam)
    print(f"t={t:5d} ms  bearing {beta:+6.1f}  yaw {pose.yaw:+6.1f}  -> {classify_yaw(pose, beta).name}")

# %% Debounced eye contact, then the arbiter's output
attention = Attention()
arbiter = Arbiter(variant=Variant.AUDIO_HAPTICS)
anna = IdentityLabel("Anna")
for t in scenario.frame_times():
    seen = synthesize_observations(scenario, t, seed=7, model=model)
    if not seen:  # she has left the scene
        continue
    obs = seen[0]
    pose = solve_pose(obs, model, cam)
    events = attention.update(obs.track_id, pose, bearing_of(obs, cam), anna, t)
    for ev in events:
        print(f"{ev.kind.value} at {ev.timestamp} ms")
    if any(e.kind is EventKind.GAZE_START for e in events):
        for cmd in arbiter.on_gaze_events(events, attention.active_gazers(t), t):
            print("  ", format_command(cmd))
