"""Dyadic social-gaze interaction engine.

Classifies two agents' gaze behavior into the five social-gaze states,
maintains the 5x5 dyad state space with stability and gate flags, and
drives a robot gaze policy with guarded probabilistic transitions. Ships
an offline simulator, a trace/replay analyzer, and a live session server.
"""

__version__ = "0.1.0"
