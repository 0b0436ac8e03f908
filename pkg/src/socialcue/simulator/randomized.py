"""Seeded random meeting scenarios for equivalence and robustness tests."""
import numpy as np

from .scenario import Keyframe, Participant, Scenario

NAMES = ("Anna", "Ben", "Carla", "Dan", "Eva", "Farid", "Greta", "Hugo")


def random_scenario(seed, noise=0.0, duration=None, max_people=5) -> Scenario:
    """A table meeting with 2..max_people participants who glance at the wearer now and then.

    Head turns take 200-400 ms. Eye-contact holds keep |yaw - bearing| within
    6 deg, and look-away holds keep it beyond 20 deg, so the scripted contact
    state never sits on the decision boundary for more than a transition.
    """
    rng = np.random.default_rng(seed)
    duration = int(duration or rng.integers(3000, 7001))
    n = int(rng.integers(2, max_people + 1))
    # spread bearings so faces do not coincide
    slots = np.sort(rng.choice(np.arange(-70, 71, 10), size=n, replace=False)).astype(float)
    names = list(rng.permutation(NAMES)[:n])
    participants = []
    for i in range(n):
        name = None if rng.random() < 0.25 else str(names[i])
        bearing = float(slots[i] + rng.uniform(-3, 3))
        distance = float(rng.uniform(900, 2500))
        enter = 0 if rng.random() < 0.7 else int(rng.integers(0, duration // 3))
        exit_ = duration if rng.random() < 0.7 else int(rng.integers(2 * duration // 3, duration + 1))
        keys = []
        t = 0
        looking = rng.random() < 0.3
        while t <= duration:
            if looking:
                yaw = bearing + rng.uniform(-6, 6)
            else:
                yaw = bearing + rng.choice([-1, 1]) * rng.uniform(20, 60)
            yaw = float(np.clip(yaw, -80, 80))
            keys.append(Keyframe(t, bearing, distance, round(yaw, 3)))
            hold = int(rng.integers(300, 2500))
            if t + hold > duration:
                break
            keys.append(Keyframe(t + hold, bearing, distance, round(yaw, 3)))
            t += hold + int(rng.integers(200, 401))
            looking = not looking
        participants.append(Participant(name, enter, exit_, tuple(keys)))
    requests = tuple(sorted(int(v) for v in rng.integers(0, duration, size=int(rng.integers(0, 3)))))
    return Scenario(duration, 30.0, participants=tuple(participants), id_requests=requests, noise=noise).validate()
