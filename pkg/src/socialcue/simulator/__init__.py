"""Scripted meetings, synthetic observations and the ground-truth event oracle."""
from .scenario import Jitter, Keyframe, Participant, Scenario, load_scenario, serialize_scenario
from .synth import ParticipantState, render_face, scene_state, synthesize_observations

__all__ = [
    "Jitter",
    "Keyframe",
    "Participant",
    "ParticipantState",
    "Scenario",
    "load_scenario",
    "render_face",
    "scene_state",
    "serialize_scenario",
    "synthesize_observations",
]
