"""Send pulses to the belt over a noisy line and watch the reader recover.

Run with ``python demos/belt_link.py``.
"""
# %% Encode a pulse for the module at 320 deg
import numpy as np

from socialcue.arbiter import BeltPulse, bearing_to_cell
from socialcue.belt import FrameReader, LoopbackBelt, encode_pulse

pulse = BeltPulse(seq=1, timestamp=0, cell=bearing_to_cell(320.0), intensity=200, duration=400)
print("frame:", encode_pulse(pulse).hex(" ").upper())

# %% A loopback belt decodes what it is sent
belt = LoopbackBelt()
for cell in (0, 4, 8, 12):
    belt.send(BeltPulse(0, 0, cell))
print("received:", belt.received)

# %% Random line noise between frames: every real frame still gets through
rng = np.random.default_rng(5)
reader = FrameReader()
sent, got = [], []
for _ in range(200):
    p = BeltPulse(0, 0, int(rng.integers(16)), int(rng.integers(256)), int(rng.integers(2000)))
    sent.append((p.cell, p.intensity, p.duration))
    noise = rng.integers(0, 256, size=int(rng.integers(0, 65)), dtype=np.uint8).tobytes()
    got += reader.feed(noise + encode_pulse(p))
recovered = sum(1 for g in got if (g.cell, g.intensity, g.duration) in sent)
print(f"{recovered} of {len(sent)} frames recovered, {len(got) - recovered} spurious, {reader.errors} resyncs")
