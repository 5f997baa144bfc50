"""Sensor-frame ingestion and dwell-based fixation segmentation.

Frames arrive as fused perception snapshots (gaze rays, face locations,
objects). Ingestion resolves one gaze target per agent per frame;
segmentation turns per-agent target samples into fixations: maximal dwells
on a single resolved target, merged across sub-tolerance interruptions and
filtered by a minimum dwell time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterator

from .geometry import (
    UNRESOLVED,
    Agent,
    AgentPose,
    Candidate,
    GazeRay,
    GazeTarget,
    GeometryConfig,
    PARTNER,
    SceneObject,
    Vec3,
    resolve_target,
)


class TimeRegressionError(ValueError):
    """A frame or sample moved backwards in time."""

    def __init__(self, t: float, last_t: float) -> None:
        super().__init__(f"time regression: t={t} after t={last_t}")
        self.t = t
        self.last_t = last_t


@dataclass(frozen=True, slots=True)
class SensorFrame:
    """One fused perception snapshot. `other_pose` is None when the partner is undetected."""

    t: float
    self_pose: AgentPose
    other_pose: AgentPose | None
    objects: tuple[SceneObject, ...]

    def __post_init__(self) -> None:
        ids = [o.id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate object ids in frame: {sorted(ids)}")


@dataclass(frozen=True, slots=True)
class TargetSample:
    t: float
    agent: Agent
    target: GazeTarget


@dataclass(frozen=True, slots=True)
class Fixation:
    """A dwell on one resolved target. `end - start` is wall time including merged gaps."""

    agent: Agent
    target: GazeTarget
    start: float
    end: float

    def __post_init__(self) -> None:
        if not self.target.is_resolved:
            raise ValueError("a fixation target cannot be Unresolved")
        if self.end < self.start:
            raise ValueError(f"fixation ends before it starts: [{self.start}, {self.end}]")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True, slots=True)
class SegmenterConfig:
    min_dwell: float = 0.20  # seconds
    gap_tolerance: float = 0.10  # seconds

    def __post_init__(self) -> None:
        if self.min_dwell <= 0 or self.gap_tolerance <= 0:
            raise ValueError("min_dwell and gap_tolerance must be positive")


def _ingest_with_candidates(
    frame: SensorFrame, objects: tuple[Candidate, ...], cfg: GeometryConfig
) -> list[TargetSample]:
    self_candidates = list(objects)
    if frame.other_pose is not None:
        self_candidates.append(Candidate(PARTNER, frame.other_pose.face_center))
    samples = [
        TargetSample(frame.t, Agent.SELF, resolve_target(frame.self_pose.gaze, self_candidates, cfg.cone_half_angle))
    ]

    if frame.other_pose is None:
        samples.append(TargetSample(frame.t, Agent.OTHER, UNRESOLVED))
    else:
        other_candidates = list(objects)
        other_candidates.append(Candidate(PARTNER, frame.self_pose.face_center))
        samples.append(
            TargetSample(frame.t, Agent.OTHER, resolve_target(frame.other_pose.gaze, other_candidates, cfg.cone_half_angle))
        )
    return samples


def ingest_frame(frame: SensorFrame, cfg: GeometryConfig) -> list[TargetSample]:
    """Resolve one target sample per agent for a single frame.

    An absent partner pose yields an Unresolved sample for that agent, and
    removes the partner's face from the robot's candidate set.
    """
    candidates = tuple(Candidate(GazeTarget.object(o.id), o.position) for o in frame.objects)
    return _ingest_with_candidates(frame, candidates, cfg)


class FrameIngestor:
    """Stream-level wrapper around ingest_frame enforcing non-decreasing timestamps."""

    def __init__(self, cfg: GeometryConfig) -> None:
        self._cfg = cfg
        self._last_t: float | None = None
        # streams reuse one objects tuple frame after frame; memo by identity
        self._memo_objects: tuple[SceneObject, ...] | None = None
        self._memo_candidates: tuple[Candidate, ...] = ()

    def _candidates(self, objects: tuple[SceneObject, ...]) -> tuple[Candidate, ...]:
        if objects is not self._memo_objects:
            self._memo_objects = objects
            self._memo_candidates = tuple(Candidate(GazeTarget.object(o.id), o.position) for o in objects)
        return self._memo_candidates

    def ingest(self, frame: SensorFrame) -> list[TargetSample]:
        if self._last_t is not None and frame.t < self._last_t:
            raise TimeRegressionError(frame.t, self._last_t)
        self._last_t = frame.t
        return _ingest_with_candidates(frame, self._candidates(frame.objects), self._cfg)


@dataclass(slots=True)
class _Run:
    """A maximal stretch of identical resolved-target samples, closed at the change time."""

    target: GazeTarget
    start: float
    end: float


class FixationSegmenter:
    """Incremental fixation segmenter for a single agent.

    Samples are interpreted sample-and-hold: a run of identical targets ends
    at the timestamp of the first differing sample (or the last sample seen,
    at finalization). A closed run merges into the previous same-target
    fixation candidate when the gap between them is under `gap_tolerance`;
    short runs of other targets inside such a gap are swallowed. Candidates
    shorter than `min_dwell` after merging are discarded.

    Fixations are emitted as soon as no future sample could change them, so
    incremental output plus `finalize()` equals one-shot segmentation of the
    whole stream.
    """

    def __init__(self, agent: Agent, cfg: SegmenterConfig) -> None:
        self.agent = agent
        self.cfg = cfg
        self._open: _Run | None = None  # still growing
        self._pending: _Run | None = None  # closed, awaiting possible merge
        self._held: list[_Run] = []  # short interrupters inside pending's merge window
        self._last_t: float | None = None
        self._finalized = False

    def push(self, sample: TargetSample) -> list[Fixation]:
        """Feed one sample; return fixations finalized by it."""
        if self._finalized:
            raise RuntimeError("segmenter already finalized")
        if sample.agent is not self.agent:
            raise ValueError(f"sample for {sample.agent} pushed into {self.agent} segmenter")
        if self._last_t is not None and sample.t < self._last_t:
            raise TimeRegressionError(sample.t, self._last_t)

        out: list[Fixation] = []
        t, target = sample.t, sample.target
        self._seal(t, out)

        if self._open is not None:
            if target == self._open.target:
                self._open.end = t
            else:
                run = _Run(self._open.target, self._open.start, t)
                self._open = None
                self._accept(run, out)
                if target.is_resolved:
                    self._open_run(target, t)
        elif target.is_resolved:
            self._open_run(target, t)

        self._last_t = t
        return out

    def finalize(self) -> list[Fixation]:
        """Close the stream and return the remaining fixations."""
        if self._finalized:
            raise RuntimeError("segmenter already finalized")
        self._finalized = True
        out: list[Fixation] = []
        if self._open is not None and self._last_t is not None:
            run = _Run(self._open.target, self._open.start, self._last_t)
            self._open = None
            self._accept(run, out)
        while self._pending is not None or self._held:
            if self._pending is not None:
                self._flush(out)
            if self._held:
                held, self._held = self._held, []
                for run in held:
                    self._accept(run, out)
        return out

    def tail(self) -> list[Fixation]:
        """Fixations the stream-so-far would still yield if it ended now.

        Non-destructive preview of `finalize()`: lets callers see an ongoing
        dwell (e.g. a partner still staring at the robot's face) before the
        run closes.
        """
        if self._finalized:
            return []
        twin = FixationSegmenter(self.agent, self.cfg)
        twin._open = _Run(self._open.target, self._open.start, self._open.end) if self._open else None
        twin._pending = _Run(self._pending.target, self._pending.start, self._pending.end) if self._pending else None
        twin._held = [_Run(r.target, r.start, r.end) for r in self._held]
        twin._last_t = self._last_t
        return twin.finalize()

    def _open_run(self, target: GazeTarget, t: float) -> None:
        # Resuming the pending fixation's target inside the merge window
        # reopens it; anything held in the gap was jitter and is dropped.
        if self._pending is not None and self._pending.target == target and t - self._pending.end < self.cfg.gap_tolerance:
            self._open = _Run(target, self._pending.start, t)
            self._pending = None
            self._held.clear()
        else:
            self._open = _Run(target, t, t)

    def _seal(self, t: float, out: list[Fixation]) -> None:
        # Once the merge window after pending.end has elapsed, no future run
        # can merge into it; flush it and promote whatever was held. A
        # promoted candidate whose target the open run is already continuing
        # is not sealed: the open run absorbs it instead.
        while self._pending is not None:
            if (
                self._open is not None
                and self._open.target == self._pending.target
                and self._open.start - self._pending.end < self.cfg.gap_tolerance
            ):
                self._open.start = self._pending.start
                self._pending = None
                self._held.clear()
                return
            if t - self._pending.end < self.cfg.gap_tolerance:
                return
            self._flush(out)
            if not self._held:
                return
            held, self._held = self._held, []
            for run in held:
                self._accept(run, out)

    def _accept(self, run: _Run, out: list[Fixation]) -> None:
        if self._pending is None:
            self._pending = run
        elif run.target == self._pending.target and run.start - self._pending.end < self.cfg.gap_tolerance:
            self._pending = _Run(run.target, self._pending.start, run.end)
            self._held.clear()
        elif run.end - self._pending.end < self.cfg.gap_tolerance:
            self._held.append(run)
        else:
            self._flush(out)
            reprocess, self._held = self._held, []
            for r in reprocess:
                self._accept(r, out)
            self._accept(run, out)

    def _flush(self, out: list[Fixation]) -> None:
        pending, self._pending = self._pending, None
        if pending is not None and pending.end - pending.start >= self.cfg.min_dwell:
            out.append(Fixation(self.agent, pending.target, pending.start, pending.end))


def segment_fixations(samples: list[TargetSample], cfg: SegmenterConfig) -> list[Fixation]:
    """One-shot segmentation of a time-ordered, single-agent sample list."""
    if not samples:
        return []
    agents = {s.agent for s in samples}
    if len(agents) > 1:
        raise ValueError(f"mixed agents in sample list: {sorted(a.value for a in agents)}")
    seg = FixationSegmenter(samples[0].agent, cfg)
    out: list[Fixation] = []
    for s in samples:
        out.extend(seg.push(s))
    out.extend(seg.finalize())
    return out


# --- JSONL frame format -----------------------------------------------------
#
# One frame per line:
#   {"t": 0.0, "self": {"face": [x,y,z], "gaze": [dx,dy,dz]}, "other": null,
#    "objects": [{"id": "cube", "label": "cube", "pos": [x,y,z]}]}
#
# `gaze` is a unit direction; the ray origin is the agent's face center.


def _pose_to_json(pose: AgentPose) -> dict:
    f, d = pose.face_center, pose.gaze.direction
    return {"face": [f.x, f.y, f.z], "gaze": [d.x, d.y, d.z]}


def _pose_from_json(agent: Agent, obj: dict) -> AgentPose:
    fx, fy, fz = (float(v) for v in obj["face"])
    dx, dy, dz = (float(v) for v in obj["gaze"])
    face = Vec3(fx, fy, fz)
    return AgentPose(agent, face, GazeRay(face, Vec3(dx, dy, dz).normalized()))


def frame_to_json(frame: SensorFrame) -> dict:
    return {
        "t": frame.t,
        "self": _pose_to_json(frame.self_pose),
        "other": None if frame.other_pose is None else _pose_to_json(frame.other_pose),
        "objects": [
            {"id": o.id, "label": o.label, "pos": [o.position.x, o.position.y, o.position.z]}
            for o in frame.objects
        ],
    }


def frame_from_json(obj: dict) -> SensorFrame:
    objects = tuple(
        SceneObject(str(o["id"]), str(o["label"]), Vec3(*(float(v) for v in o["pos"])))
        for o in obj.get("objects", [])
    )
    other = obj.get("other")
    return SensorFrame(
        t=float(obj["t"]),
        self_pose=_pose_from_json(Agent.SELF, obj["self"]),
        other_pose=None if other is None else _pose_from_json(Agent.OTHER, other),
        objects=objects,
    )


def write_frames(fp: IO[str], frames: list[SensorFrame]) -> None:
    for frame in frames:
        fp.write(json.dumps(frame_to_json(frame), separators=(",", ":")) + "\n")


def read_frames(fp: IO[str]) -> Iterator[tuple[int, SensorFrame]]:
    """Yield (line_number, frame) pairs; raises ValueError naming the bad line."""
    for lineno, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            yield lineno, frame_from_json(json.loads(line))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed frame at line {lineno}: {exc}") from exc
