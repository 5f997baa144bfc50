"""Deterministic closed-loop simulation: partner policy + controller + classifier.

Each tick synthesizes a SensorFrame from both agents' current gaze intents
(perfect perception by default, optional angular noise), pushes it through
the shared DyadEngine, lets the robot controller react to the fresh dyad
state, and records everything. Identical scenario and seed give
byte-identical traces.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO

from .control import (
    BehaviorProfile,
    GazeAction,
    GazeController,
    Rng,
    TransitionModel,
)
from .engine import DyadEngine, DyadSnapshot, EngineConfig
from .events import SensorFrame
from .geometry import (
    Agent,
    AgentPose,
    GazeRay,
    GazeTarget,
    PARTNER,
    Scene,
    SceneObject,
    TargetKind,
    UNRESOLVED,
    Vec3,
)
from .states import ALL_PAIRS, AgentGazeState, DyadState, dyad_state


# --- target string codec --------------------------------------------------------
#
# Compact form used in trace records and scripted timelines:
# "partner", "unresolved", or "object:<id>".


def encode_target(target: GazeTarget) -> str:
    if target.kind is TargetKind.PARTNER:
        return "partner"
    if target.kind is TargetKind.UNRESOLVED:
        return "unresolved"
    return f"object:{target.object_id}"


def decode_target(text: str) -> GazeTarget:
    if text == "partner":
        return PARTNER
    if text == "unresolved":
        return UNRESOLVED
    if text.startswith("object:"):
        return GazeTarget.object(text.split(":", 1)[1])
    raise ValueError(f"unknown gaze target {text!r}")


# --- partner policies --------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ScriptStep:
    t: float
    target: GazeTarget
    pointing: bool = False


@dataclass(frozen=True, slots=True)
class StaticPartner:
    target: GazeTarget


@dataclass(frozen=True, slots=True)
class ScriptedPartner:
    steps: tuple[ScriptStep, ...]

    def __post_init__(self) -> None:
        ts = [s.t for s in self.steps]
        if ts != sorted(ts):
            raise ValueError("scripted timeline must be time-ordered")

    def step_at(self, now: float) -> ScriptStep | None:
        current = None
        for s in self.steps:
            if s.t <= now:
                current = s
            else:
                break
        return current


@dataclass(frozen=True, slots=True)
class ReactivePartner:
    model: TransitionModel
    profile: BehaviorProfile
    seed: int


PartnerPolicy = StaticPartner | ScriptedPartner | ReactivePartner


# --- scenario ------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    scene: Scene
    partner: PartnerPolicy
    robot_model: TransitionModel
    robot_profile: BehaviorProfile
    duration: float
    seed: int
    tick: float = 0.05
    noise_sigma: float = 0.0  # radians, gaussian perturbation of synthesized rays
    engine: EngineConfig = field(default_factory=EngineConfig)

    def __post_init__(self) -> None:
        if self.tick <= 0:
            raise ValueError("tick must be positive")
        if self.duration < self.tick:
            raise ValueError("duration must be at least one tick")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma cannot be negative")


# --- trace ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TickRecord:
    t: float
    self_target: GazeTarget
    other_target: GazeTarget
    self_state: AgentGazeState
    other_state: AgentGazeState
    stable: bool
    gate: bool
    action: GazeAction | None = None
    intent: AgentGazeState | None = None


@dataclass
class Trace:
    records: list[TickRecord]
    tick: float
    frames: list[SensorFrame] = field(default_factory=list)


def _action_to_json(action: GazeAction) -> dict:
    return {
        "kind": action.kind.value,
        "object_id": action.object_id,
        "onset_latency": action.onset_latency,
        "hold": action.hold,
        "pointing": action.pointing,
        "speaking": action.speaking,
    }


def _action_from_json(obj: dict) -> GazeAction:
    from .control import ActionKind

    return GazeAction(
        kind=ActionKind(obj["kind"]),
        object_id=obj.get("object_id"),
        onset_latency=float(obj["onset_latency"]),
        hold=float(obj["hold"]),
        pointing=bool(obj["pointing"]),
        speaking=bool(obj["speaking"]),
    )


def record_to_json(rec: TickRecord) -> dict:
    return {
        "t": rec.t,
        "self_target": encode_target(rec.self_target),
        "other_target": encode_target(rec.other_target),
        "self_state": rec.self_state.value,
        "other_state": rec.other_state.value,
        "stable": rec.stable,
        "gate": rec.gate,
        "action": None if rec.action is None else _action_to_json(rec.action),
        "intent": None if rec.intent is None else rec.intent.value,
    }


def record_from_json(obj: dict) -> TickRecord:
    return TickRecord(
        t=float(obj["t"]),
        self_target=decode_target(obj["self_target"]),
        other_target=decode_target(obj["other_target"]),
        self_state=AgentGazeState(obj["self_state"]),
        other_state=AgentGazeState(obj["other_state"]),
        stable=bool(obj["stable"]),
        gate=bool(obj["gate"]),
        action=None if obj.get("action") is None else _action_from_json(obj["action"]),
        intent=None if obj.get("intent") is None else AgentGazeState(obj["intent"]),
    )


def write_trace(fp: IO[str], trace: Trace) -> None:
    for rec in trace.records:
        fp.write(json.dumps(record_to_json(rec), separators=(",", ":")) + "\n")


def read_trace(fp: IO[str], tick: float | None = None) -> Trace:
    records = []
    for lineno, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            records.append(record_from_json(json.loads(line)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed trace record at line {lineno}: {exc}") from exc
    if tick is None:
        tick = records[1].t - records[0].t if len(records) > 1 else 0.05
    return Trace(records=records, tick=tick)


# --- simulation loop ---------------------------------------------------------------

_OFF_DIRECTIONS = (
    Vec3(0.0, -1.0, 0.0),
    Vec3(0.0, 1.0, 0.0),
    Vec3(0.0, 0.0, -1.0),
    Vec3(0.0, 0.0, 1.0),
    Vec3(-1.0, 0.0, 0.0),
    Vec3(1.0, 0.0, 0.0),
)


def _off_target_direction(origin: Vec3, positions: list[Vec3], cone: float) -> Vec3:
    """A direction whose cone contains no candidate, for idle/unresolved gaze."""
    for d in _OFF_DIRECTIONS:
        ok = True
        for p in positions:
            v = p - origin
            n = v.norm()
            if n == 0.0:
                continue
            cos = max(-1.0, min(1.0, d.dot(v) / n))
            if math.acos(cos) <= cone * 1.5:
                ok = False
                break
        if ok:
            return d
    raise ValueError("no off-target direction available; scene surrounds the agent")


class _FrameSynthesizer:
    """Perfect-perception frame builder over a static scene layout."""

    def __init__(self, scene: Scene, engine_cfg: EngineConfig, noise_sigma: float, noise_rng: Rng) -> None:
        self._objects = scene.objects
        self._positions = {o.id: o.position for o in scene.objects}
        self._self_face = scene.self_pose.face_center
        self._other_face = scene.other_pose.face_center
        cone = engine_cfg.geometry.cone_half_angle
        self._self_off = _off_target_direction(
            self._self_face, [self._other_face, *self._positions.values()], cone
        )
        self._other_off = _off_target_direction(
            self._other_face, [self._self_face, *self._positions.values()], cone
        )
        self._noise_sigma = noise_sigma
        self._noise_rng = noise_rng
        self._pose_cache: dict[tuple[Agent, GazeTarget], AgentPose] = {}

    def _direction(self, agent: Agent, target: GazeTarget) -> Vec3:
        origin = self._self_face if agent is Agent.SELF else self._other_face
        if target.kind is TargetKind.PARTNER:
            aim_at = self._other_face if agent is Agent.SELF else self._self_face
        elif target.kind is TargetKind.OBJECT:
            aim_at = self._positions[target.object_id]
        else:
            return self._self_off if agent is Agent.SELF else self._other_off
        v = aim_at - origin
        if v.norm() == 0.0:
            return self._self_off if agent is Agent.SELF else self._other_off
        d = v.normalized()
        if self._noise_sigma > 0.0:
            r = self._noise_rng
            d = Vec3(
                d.x + r.gauss(0.0, self._noise_sigma),
                d.y + r.gauss(0.0, self._noise_sigma),
                d.z + r.gauss(0.0, self._noise_sigma),
            )
            if d.norm() == 0.0:
                d = Vec3(0.0, -1.0, 0.0)
            d = d.normalized()
        return d

    def _pose(self, agent: Agent, target: GazeTarget) -> AgentPose:
        if self._noise_sigma > 0.0:
            face = self._self_face if agent is Agent.SELF else self._other_face
            return AgentPose(agent, face, GazeRay(face, self._direction(agent, target)))
        pose = self._pose_cache.get((agent, target))
        if pose is None:
            face = self._self_face if agent is Agent.SELF else self._other_face
            pose = AgentPose(agent, face, GazeRay(face, self._direction(agent, target)))
            self._pose_cache[(agent, target)] = pose
        return pose

    def frame(self, t: float, self_target: GazeTarget, other_target: GazeTarget) -> SensorFrame:
        return SensorFrame(
            t=t,
            self_pose=self._pose(Agent.SELF, self_target),
            other_pose=self._pose(Agent.OTHER, other_target),
            objects=self._objects,
        )


def run(scenario: Scenario) -> Trace:
    """Run the closed loop and return the full trace (with synthesized frames)."""
    engine = DyadEngine(scenario.engine)
    root = Rng(scenario.seed)
    synthesizer = _FrameSynthesizer(scenario.scene, scenario.engine, scenario.noise_sigma, root.split("noise"))
    min_mgw = scenario.engine.classifier.mutual_gaze_window
    robot = GazeController(
        scenario.robot_model, scenario.robot_profile, root.split("robot"), min_mutual_gaze=min_mgw
    )

    partner_ctrl: GazeController | None = None
    if isinstance(scenario.partner, ReactivePartner):
        partner_ctrl = GazeController(
            scenario.partner.model,
            scenario.partner.profile,
            Rng(scenario.partner.seed),
            min_mutual_gaze=min_mgw,
        )

    base = scenario.scene
    table = scenario.engine.stability
    n_ticks = int(round(scenario.duration / scenario.tick))
    records: list[TickRecord] = []
    frames: list[SensorFrame] = []
    last_pointed: str | None = None

    # scene layout is static; only the focus annotation varies tick to tick
    robot_scenes: dict[str | None, Scene] = {}
    partner_scenes: dict[str | None, Scene] = {}

    def annotated(cache: dict[str | None, Scene], swap: bool, focus: str | None) -> Scene:
        scene = cache.get(focus)
        if scene is None:
            scene = Scene(
                objects=base.objects,
                self_pose=base.other_pose if swap else base.self_pose,
                other_pose=base.self_pose if swap else base.other_pose,
                partner_focus=focus,
            )
            cache[focus] = scene
        return scene

    for k in range(n_ticks):
        t = k * scenario.tick

        pointed: str | None = None
        if isinstance(scenario.partner, StaticPartner):
            other_target = scenario.partner.target
        elif isinstance(scenario.partner, ScriptedPartner):
            step = scenario.partner.step_at(t)
            other_target = step.target if step is not None else UNRESOLVED
            if step is not None and step.pointing and step.target.kind is TargetKind.OBJECT:
                pointed = step.target.object_id
        else:
            assert partner_ctrl is not None
            other_target = partner_ctrl.current_target

        frame = synthesizer.frame(t, robot.current_target, other_target)
        frames.append(frame)
        snapshot = engine.observe(frame)

        if pointed is not None and pointed != last_pointed:
            robot.preempt_with_pointing(pointed, base)
        last_pointed = pointed

        robot_scene = annotated(robot_scenes, False, engine.latest_object_fixation(Agent.OTHER))
        step_result = robot.step(t, snapshot.dyad, robot_scene)

        if partner_ctrl is not None:
            partner_dyad = dyad_state(snapshot.other_state, snapshot.self_state, table)
            partner_scene = annotated(partner_scenes, True, engine.latest_object_fixation(Agent.SELF))
            partner_ctrl.step(t, partner_dyad, partner_scene)

        records.append(
            TickRecord(
                t=t,
                self_target=snapshot.self_target,
                other_target=snapshot.other_target,
                self_state=snapshot.self_state,
                other_state=snapshot.other_state,
                stable=snapshot.stable,
                gate=snapshot.gate,
                action=step_result.emitted,
                intent=step_result.intent,
            )
        )

    return Trace(records=records, tick=scenario.tick, frames=frames)


# --- metrics -------------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    occupancy: dict[str, float]  # "PO,PO" -> fraction of ticks
    joint_attention_episodes: int
    gate_passages: int
    time_to_first_stable: float | None
    stable_fraction: float


JOINT_ATTENTION_MIN_OVERLAP = 0.3  # seconds


def compute_metrics(trace: Trace) -> Metrics:
    """Summarize a trace; each record is held for one tick of wall time."""
    if not trace.records:
        raise ValueError("cannot compute metrics of an empty trace")
    n = len(trace.records)

    counts = {pair: 0 for pair in ALL_PAIRS}
    for rec in trace.records:
        counts[(rec.self_state, rec.other_state)] += 1
    occupancy = {f"{a.value},{b.value}": c / n for (a, b), c in counts.items()}

    episodes = 0
    run_len = 0
    run_obj: str | None = None
    for rec in [*trace.records, None]:
        obj = None
        if (
            rec is not None
            and rec.self_target.kind is TargetKind.OBJECT
            and rec.self_target == rec.other_target
        ):
            obj = rec.self_target.object_id
        if obj is not None and obj == run_obj:
            run_len += 1
        else:
            if run_obj is not None and run_len * trace.tick >= JOINT_ATTENTION_MIN_OVERLAP:
                episodes += 1
            run_obj, run_len = obj, 1 if obj is not None else 0

    gate_passages = 0
    prev_gate = False
    for rec in trace.records:
        if rec.gate and not prev_gate:
            gate_passages += 1
        prev_gate = rec.gate

    stable_ticks = sum(1 for rec in trace.records if rec.stable)
    first_stable = next((rec.t for rec in trace.records if rec.stable), None)

    return Metrics(
        occupancy=occupancy,
        joint_attention_episodes=episodes,
        gate_passages=gate_passages,
        time_to_first_stable=first_stable,
        stable_fraction=stable_ticks / n,
    )


def metrics_to_json(metrics: Metrics) -> dict:
    return {
        "occupancy": metrics.occupancy,
        "joint_attention_episodes": metrics.joint_attention_episodes,
        "gate_passages": metrics.gate_passages,
        "time_to_first_stable": metrics.time_to_first_stable,
        "stable_fraction": metrics.stable_fraction,
    }
