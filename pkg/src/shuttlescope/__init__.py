"""Badminton match analysis: monocular 3D shot reconstruction, rally
scoring, shot classification, and a replay-ready query API."""

__version__ = "0.1.0"
