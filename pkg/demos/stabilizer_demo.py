"""Take the shake out of a head-worn camera.

Run with ``python demos/stabilizer_demo.py``.
"""
# %% 100 frames of a textured scene shaken by an 8 px, 10-frame sinusoid
import numpy as np

from socialcue.simulator.synth import jittered_sequence
from socialcue.stabilizer import Stabilizer, track_flow, estimate_global_motion

frames, offsets = jittered_sequence(100, amplitude=8.0, period=10, seed=3)
offsets = np.asarray(offsets)
print(f"injected jitter RMS: {np.sqrt((offsets ** 2).sum(1).mean()):.2f} px")

# %% One step of flow and robust motion fitting
motion = estimate_global_motion(track_flow(frames[0], frames[1], 100))
print(f"frame 0 -> 1: translation {np.round(motion.translation, 2)}, true {np.round(offsets[1] - offsets[0], 2)}")

# %% Stabilize the stream; output lags by the smoothing radius
stab = Stabilizer(window=31, seed=3)
out = []
for f in frames:
    out += stab.step(f)
out += stab.flush()
corr = np.array([s.correction.translation for s in out])
residual = offsets + corr
residual -= residual.mean(0)
print(f"residual jitter RMS after stabilization: {np.sqrt((residual ** 2).sum(1).mean()):.2f} px")
