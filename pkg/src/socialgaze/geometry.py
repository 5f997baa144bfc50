"""Scene geometry: agents, objects, gaze rays, and gaze-target resolution.

Coordinates are metric and right-handed, with the robot's eye midpoint at
the origin and +z toward the partner's nominal seat. Everything here is a
pure function over immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable


class Agent(Enum):
    """The two sides of the dyad. SELF is the robot, OTHER the partner."""

    SELF = "self"
    OTHER = "other"

    def counterpart(self) -> "Agent":
        return Agent.OTHER if self is Agent.SELF else Agent.SELF


@dataclass(frozen=True, slots=True)
class Vec3:
    """A point or direction in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite vector component: ({self.x}, {self.y}, {self.z})")

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize zero vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def distance_to(self, other: "Vec3") -> float:
        return (self - other).norm()


_UNIT_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class GazeRay:
    """A gaze ray from an eye midpoint along a unit direction."""

    origin: Vec3
    direction: Vec3

    def __post_init__(self) -> None:
        n = self.direction.norm()
        if abs(n - 1.0) > _UNIT_TOL:
            raise ValueError(f"gaze direction must be a unit vector, got |d|={n!r}")

    @staticmethod
    def aimed(origin: Vec3, at: Vec3) -> "GazeRay":
        """Ray from `origin` pointing at `at`."""
        return GazeRay(origin, (at - origin).normalized())


@dataclass(frozen=True, slots=True)
class SceneObject:
    id: str
    label: str
    position: Vec3


@dataclass(frozen=True, slots=True)
class AgentPose:
    agent: Agent
    face_center: Vec3
    gaze: GazeRay


class TargetKind(Enum):
    PARTNER = "partner"
    OBJECT = "object"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True, slots=True)
class GazeTarget:
    """Where a gaze ray landed: the partner's face, a named object, or nothing."""

    kind: TargetKind
    object_id: str | None = None

    def __post_init__(self) -> None:
        if (self.kind is TargetKind.OBJECT) != (self.object_id is not None):
            raise ValueError("object_id is required exactly when kind is OBJECT")

    @staticmethod
    def partner() -> "GazeTarget":
        return PARTNER

    @staticmethod
    def unresolved() -> "GazeTarget":
        return UNRESOLVED

    @staticmethod
    def object(object_id: str) -> "GazeTarget":
        return GazeTarget(TargetKind.OBJECT, object_id)

    @property
    def is_object(self) -> bool:
        return self.kind is TargetKind.OBJECT

    @property
    def is_partner(self) -> bool:
        return self.kind is TargetKind.PARTNER

    @property
    def is_resolved(self) -> bool:
        return self.kind is not TargetKind.UNRESOLVED


PARTNER = GazeTarget(TargetKind.PARTNER)
UNRESOLVED = GazeTarget(TargetKind.UNRESOLVED)


@dataclass(frozen=True, slots=True)
class Scene:
    """Two agent poses plus the labeled objects between them.

    `partner_focus` is an optional annotation naming the object of the
    partner's most recent attention shift; the controller uses it to pick
    the referent when responding to a partner-led joint-attention bid.
    """

    objects: tuple[SceneObject, ...]
    self_pose: AgentPose
    other_pose: AgentPose
    partner_focus: str | None = None

    def __post_init__(self) -> None:
        ids = [o.id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate object ids in scene: {sorted(ids)}")

    def object_by_id(self, object_id: str) -> SceneObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(f"no object {object_id!r} in scene")

    def has_object(self, object_id: str) -> bool:
        return any(o.id == object_id for o in self.objects)

    def pose_of(self, agent: Agent) -> AgentPose:
        return self.self_pose if agent is Agent.SELF else self.other_pose


@dataclass(frozen=True, slots=True)
class GeometryConfig:
    """Thresholds for matching a gaze ray to a target.

    `face_hit_radius` is reserved for ingestion-side validation; target
    matching itself is purely cone-based.
    """

    cone_half_angle: float = 0.1745  # radians, ~10 degrees
    face_hit_radius: float = 0.12  # meters

    def __post_init__(self) -> None:
        if not 0.0 < self.cone_half_angle < math.pi / 2:
            raise ValueError(f"cone_half_angle must be in (0, pi/2), got {self.cone_half_angle}")


def angular_distance(ray: GazeRay, point: Vec3) -> float:
    """Angle in [0, pi] between the ray's direction and the ray-origin-to-point vector.

    Raises ValueError for a point coincident with the ray origin.
    """
    v = point - ray.origin
    n = v.norm()
    if n == 0.0:
        raise ValueError("coincident point: angular distance undefined at the ray origin")
    cos = ray.direction.dot(v) / n
    # Clamp against rounding drift before acos.
    cos = max(-1.0, min(1.0, cos))
    return math.acos(cos)


@dataclass(frozen=True, slots=True)
class Candidate:
    """One potential landing point for a gaze ray."""

    target: GazeTarget
    position: Vec3


def resolve_target(ray: GazeRay, candidates: Iterable[Candidate], cone_half_angle: float) -> GazeTarget:
    """Pick the in-cone candidate with minimal angular distance to the ray.

    Ties on angle go to the partner's face over any object; ties among
    objects go to the one closer to the ray origin, then to the
    lexicographically smaller id. Candidates coincident with the ray
    origin are skipped. Returns UNRESOLVED when no candidate is in cone.
    """
    ox, oy, oz = ray.origin.x, ray.origin.y, ray.origin.z
    dx, dy, dz = ray.direction.x, ray.direction.y, ray.direction.z
    acos = math.acos
    best_angle = math.inf
    tied: list[Candidate] = []
    for cand in candidates:
        p = cand.position
        vx, vy, vz = p.x - ox, p.y - oy, p.z - oz
        n = math.sqrt(vx * vx + vy * vy + vz * vz)
        if n == 0.0:
            continue
        cos = (dx * vx + dy * vy + dz * vz) / n
        angle = acos(max(-1.0, min(1.0, cos)))
        if angle > cone_half_angle:
            continue
        if angle < best_angle:
            best_angle = angle
            tied = [cand]
        elif angle == best_angle:
            tied.append(cand)
    if not tied:
        return UNRESOLVED
    for cand in tied:
        if cand.target.kind is TargetKind.PARTNER:
            return cand.target
    return min(
        tied,
        key=lambda c: (c.position.distance_to(ray.origin), c.target.object_id),
    ).target


def resolve_gaze_target(ray: GazeRay, scene: Scene, cfg: GeometryConfig, observer: Agent) -> GazeTarget:
    """Resolve where `observer`'s gaze ray lands in `scene`.

    Candidates are the counterpart agent's face center plus every object
    position; the observer's own pose is never a candidate.
    """
    counterpart = scene.pose_of(observer.counterpart())
    candidates = [Candidate(PARTNER, counterpart.face_center)]
    candidates.extend(Candidate(GazeTarget.object(o.id), o.position) for o in scene.objects)
    return resolve_target(ray, candidates, cfg.cone_half_angle)
