"""Non-verbal social cues for visually impaired users from a wearable camera."""

__version__ = "0.1.0"
