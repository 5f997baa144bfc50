"""The shared perception pipeline: frames in, dyad states out.

One DyadEngine instance per session. The simulator, the offline replay
command, and the live session server all push SensorFrames through this
same pipeline, so a recorded frame stream replayed offline reproduces a
session's state sequence exactly.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

from .events import (
    Fixation,
    FixationSegmenter,
    FrameIngestor,
    SegmenterConfig,
    SensorFrame,
)
from .geometry import Agent, GazeTarget, GeometryConfig, TargetKind
from .states import (
    AgentGazeState,
    ClassifierConfig,
    DyadState,
    StabilityTable,
    classify_agent,
    default_stability_table,
    dyad_state,
)


@dataclass(frozen=True)
class EngineConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    stability: StabilityTable = field(default_factory=default_stability_table)


@dataclass(frozen=True, slots=True)
class DyadSnapshot:
    """Engine output for one frame."""

    t: float
    self_target: GazeTarget
    other_target: GazeTarget
    self_state: AgentGazeState
    other_state: AgentGazeState
    stable: bool
    gate: bool

    @property
    def dyad(self) -> DyadState:
        return DyadState(self.self_state, self.other_state, self.stable, self.gate)


class DyadEngine:
    """Stateful per-session pipeline: ingest -> segment -> classify."""

    def __init__(self, cfg: EngineConfig | None = None) -> None:
        self.cfg = cfg or EngineConfig()
        self._ingestor = FrameIngestor(self.cfg.geometry)
        self._segmenters = {
            Agent.SELF: FixationSegmenter(Agent.SELF, self.cfg.segmenter),
            Agent.OTHER: FixationSegmenter(Agent.OTHER, self.cfg.segmenter),
        }
        self._emitted: dict[Agent, deque[Fixation]] = {Agent.SELF: deque(), Agent.OTHER: deque()}
        self._visible: dict[Agent, list[Fixation]] = {Agent.SELF: [], Agent.OTHER: []}
        self._last_snapshot: DyadSnapshot | None = None

    def observe(self, frame: SensorFrame) -> DyadSnapshot:
        """Push one frame; classify both agents at the frame's timestamp."""
        samples = self._ingestor.ingest(frame)
        targets: dict[Agent, GazeTarget] = {}
        for sample in samples:
            targets[sample.agent] = sample.target
            self._emitted[sample.agent].extend(self._segmenters[sample.agent].push(sample))

        window_lo = frame.t - self.cfg.classifier.window
        visible: dict[Agent, list[Fixation]] = {}
        for agent in (Agent.SELF, Agent.OTHER):
            emitted = self._emitted[agent]
            while emitted and emitted[0].end < window_lo:
                emitted.popleft()
            visible[agent] = list(emitted) + self._segmenters[agent].tail()

        self_state = classify_agent(frame.t, visible[Agent.SELF], visible[Agent.OTHER], self.cfg.classifier)
        other_state = classify_agent(frame.t, visible[Agent.OTHER], visible[Agent.SELF], self.cfg.classifier)
        dyad = dyad_state(self_state, other_state, self.cfg.stability)

        self._visible = visible
        self._last_snapshot = DyadSnapshot(
            t=frame.t,
            self_target=targets[Agent.SELF],
            other_target=targets[Agent.OTHER],
            self_state=self_state,
            other_state=other_state,
            stable=dyad.stable,
            gate=dyad.gate,
        )
        return self._last_snapshot

    def latest_object_fixation(self, agent: Agent) -> str | None:
        """Id of the agent's most recent object fixation in the window, if any."""
        for f in reversed(self._visible[agent]):
            if f.target.kind is TargetKind.OBJECT:
                return f.target.object_id
        return None

    def partner_focus(self) -> str | None:
        """Id of the partner's most recent object fixation, if any."""
        return self.latest_object_fixation(Agent.OTHER)

    @property
    def last_snapshot(self) -> DyadSnapshot | None:
        return self._last_snapshot


# --- state log format ---------------------------------------------------------
#
# One record per frame: {"t": 0.05, "self_state": "PO", "other_state": "OO",
# "stable": false, "gate": false}. Written by the replay command and embedded
# (with target and action columns) in simulator traces.


def state_record(snapshot: DyadSnapshot) -> dict:
    return {
        "t": snapshot.t,
        "self_state": snapshot.self_state.value,
        "other_state": snapshot.other_state.value,
        "stable": snapshot.stable,
        "gate": snapshot.gate,
    }


def state_record_line(snapshot: DyadSnapshot) -> str:
    return json.dumps(state_record(snapshot), separators=(",", ":"))
