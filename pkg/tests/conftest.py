from __future__ import annotations

import math
import random

import pytest

from socialgaze.events import Fixation, TargetSample
from socialgaze.geometry import (
    Agent,
    AgentPose,
    GazeRay,
    GazeTarget,
    GeometryConfig,
    Scene,
    SceneObject,
    Vec3,
)

ORIGIN = Vec3(0.0, 0.0, 0.0)
FORWARD = Vec3(0.0, 0.0, 1.0)


def ray(origin: Vec3 = ORIGIN, direction: Vec3 = FORWARD) -> GazeRay:
    return GazeRay(origin, direction.normalized())


def pose(agent: Agent, face: Vec3, toward: Vec3) -> AgentPose:
    return AgentPose(agent, face, GazeRay.aimed(face, toward))


def simple_scene(
    objects: list[tuple[str, Vec3]] | None = None,
    partner_face: Vec3 = Vec3(0.0, 0.0, 1.2),
    partner_focus: str | None = None,
) -> Scene:
    objs = tuple(SceneObject(oid, oid, p) for oid, p in (objects or []))
    return Scene(
        objects=objs,
        self_pose=pose(Agent.SELF, ORIGIN, partner_face),
        other_pose=pose(Agent.OTHER, partner_face, ORIGIN),
        partner_focus=partner_focus,
    )


def fix(agent: Agent, target: GazeTarget, start: float, end: float) -> Fixation:
    return Fixation(agent, target, start, end)


def sample(t: float, target: GazeTarget, agent: Agent = Agent.OTHER) -> TargetSample:
    return TargetSample(t, agent, target)


def rotated(v: Vec3, axis: Vec3, angle: float) -> Vec3:
    """Rodrigues rotation of v around a unit axis."""
    k = axis.normalized()
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    cross = Vec3(
        k.y * v.z - k.z * v.y,
        k.z * v.x - k.x * v.z,
        k.x * v.y - k.y * v.x,
    )
    dot = k.dot(v)
    return Vec3(
        v.x * cos_a + cross.x * sin_a + k.x * dot * (1 - cos_a),
        v.y * cos_a + cross.y * sin_a + k.y * dot * (1 - cos_a),
        v.z * cos_a + cross.z * sin_a + k.z * dot * (1 - cos_a),
    )


@pytest.fixture
def geo_cfg() -> GeometryConfig:
    return GeometryConfig()


def seeded(seed: int) -> random.Random:
    return random.Random(seed)
