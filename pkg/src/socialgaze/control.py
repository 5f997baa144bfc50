"""Robot-side gaze policy.

Transitions are a hybrid of rule-based and probabilistic: each of the 25
dyad pairs owns a weight vector over the five intended self-states, guard
predicates zero out intents that are not allowed from the current dyad
state (initiating joint attention only at the mutual partner-oriented
gate, responding only to a partner initiation), and the remaining mass is
renormalized and sampled. Intents expand into timed gaze actions whose
holds and latencies carry profile-driven exponential jitter.
"""

from __future__ import annotations

import hashlib
import math
import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping

from .geometry import PARTNER, UNRESOLVED, GazeTarget, Scene
from .states import ALL_PAIRS, STATE_ORDER, AgentGazeState, DyadState

_MASK64 = (1 << 64) - 1


class TransitionModelError(ValueError):
    """A transition model is structurally invalid."""


class PlanningError(ValueError):
    """An intent cannot be expanded into actions in the current scene."""


class Rng:
    """Deterministic seeded generator with derivable per-component streams."""

    def __init__(self, seed: int) -> None:
        self.seed = seed & _MASK64
        self._r = random.Random(self.seed)

    def random(self) -> float:
        return self._r.random()

    def exponential(self, mean: float) -> float:
        """Exponential draw with the given mean (one uniform consumed)."""
        return self._r.expovariate(1.0 / mean)

    def gauss(self, mu: float, sigma: float) -> float:
        return self._r.gauss(mu, sigma)

    def index(self, n: int) -> int:
        return self._r.randrange(n)

    def split(self, label: str) -> "Rng":
        """Independent child stream; identical (seed, label) gives an identical child."""
        digest = hashlib.sha256(f"{self.seed}/{label}".encode()).digest()
        return Rng(int.from_bytes(digest[:8], "big"))


class PointingStyle(Enum):
    STRAIGHT_ARM = "straight_arm"
    HIP_BEND = "hip_bend"


@dataclass(frozen=True, slots=True)
class BehaviorProfile:
    """Introvert/extrovert parameterization of gaze timing and pointing posture."""

    name: str
    fixation_hold_mean: float
    onset_latency_mean: float
    pointing_style: PointingStyle

    def __post_init__(self) -> None:
        if self.fixation_hold_mean <= 0 or self.onset_latency_mean <= 0:
            raise ValueError("profile means must be positive")
        style_by_name = {"introvert": PointingStyle.STRAIGHT_ARM, "extrovert": PointingStyle.HIP_BEND}
        if self.name not in style_by_name:
            raise ValueError(f"unknown profile name {self.name!r}")
        if self.pointing_style is not style_by_name[self.name]:
            raise ValueError(f"{self.name} profile requires {style_by_name[self.name].value} pointing")

    @staticmethod
    def introvert() -> "BehaviorProfile":
        return BehaviorProfile("introvert", 1.6, 0.45, PointingStyle.STRAIGHT_ARM)

    @staticmethod
    def extrovert() -> "BehaviorProfile":
        return BehaviorProfile("extrovert", 1.0, 0.25, PointingStyle.HIP_BEND)

    @staticmethod
    def named(name: str) -> "BehaviorProfile":
        if name == "introvert":
            return BehaviorProfile.introvert()
        if name == "extrovert":
            return BehaviorProfile.extrovert()
        raise ValueError(f"unknown profile name {name!r}")


class ActionKind(Enum):
    FIXATE_PARTNER = "fixate_partner"
    FIXATE_OBJECT = "fixate_object"
    IDLE = "idle"


@dataclass(frozen=True, slots=True)
class GazeAction:
    kind: ActionKind
    object_id: str | None = None
    onset_latency: float = 0.0
    hold: float = 1.0
    pointing: bool = False
    speaking: bool = False

    def __post_init__(self) -> None:
        if self.hold <= 0:
            raise ValueError("action hold must be positive")
        if self.onset_latency < 0:
            raise ValueError("onset latency cannot be negative")
        if (self.kind is ActionKind.FIXATE_OBJECT) != (self.object_id is not None):
            raise ValueError("object_id is required exactly for fixate_object actions")


# --- guards ------------------------------------------------------------------

GuardPredicate = Callable[[DyadState, Scene], bool]

GUARD_PREDICATES: dict[str, GuardPredicate] = {
    "always": lambda dyad, scene: True,
    "at_gate": lambda dyad, scene: dyad.gate,
    "partner_initiating": lambda dyad, scene: dyad.other_state is AgentGazeState.IJA,
}


@dataclass(frozen=True, slots=True)
class GuardTable:
    """Per-intent guard predicate names, resolved in GUARD_PREDICATES."""

    names: Mapping[AgentGazeState, str]

    def __post_init__(self) -> None:
        for state in STATE_ORDER:
            name = self.names.get(state)
            if name is None:
                raise ValueError(f"no guard named for intent {state.value}")
            if name not in GUARD_PREDICATES:
                raise ValueError(f"unknown guard predicate {name!r}")

    def allows(self, intent: AgentGazeState, dyad: DyadState, scene: Scene) -> bool:
        return GUARD_PREDICATES[self.names[intent]](dyad, scene)


def default_guard_table() -> GuardTable:
    s = AgentGazeState
    return GuardTable(
        {
            s.PO: "always",
            s.OO: "always",
            s.INT: "always",
            s.IJA: "at_gate",
            s.RJA: "partner_initiating",
        }
    )


# --- transition model ---------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TransitionModel:
    """Weight vectors over intended self-states, one row per dyad pair."""

    rows: Mapping[tuple[AgentGazeState, AgentGazeState], Mapping[AgentGazeState, float]]
    guards: GuardTable

    def __post_init__(self) -> None:
        for pair in ALL_PAIRS:
            row = self.rows.get(pair)
            if row is None:
                raise TransitionModelError(f"missing transition row for pair {_pair_name(pair)}")
            total = 0.0
            for state, w in row.items():
                if not math.isfinite(w) or w < 0.0:
                    raise TransitionModelError(
                        f"weight for {state.value} in row {_pair_name(pair)} must be finite and non-negative"
                    )
                total += w
            if total <= 0.0:
                raise TransitionModelError(f"row {_pair_name(pair)} has no positive weight")


def _pair_name(pair: tuple[AgentGazeState, AgentGazeState]) -> str:
    return f"({pair[0].value},{pair[1].value})"


def default_transition_model() -> TransitionModel:
    """Baseline policy: reciprocate the partner, use the gate to initiate.

    Rows lean toward the partner's current state (mutual pairs are stable),
    put initiating mass on the gate pair, and put strong responding mass
    wherever the partner is initiating.
    """
    s = AgentGazeState
    rows: dict[tuple[AgentGazeState, AgentGazeState], dict[AgentGazeState, float]] = {}
    for pair in ALL_PAIRS:
        _, other = pair
        w = {s.PO: 2.0, s.OO: 1.0, s.INT: 0.5, s.RJA: 0.0, s.IJA: 0.0}
        if other is s.PO:
            w[s.PO] += 2.0
        if pair == (s.PO, s.PO):
            w[s.IJA] = 4.0
        if other is s.IJA:
            w[s.RJA] = 6.0
        if other is s.OO:
            w[s.OO] += 2.0
        if other is s.INT:
            w[s.INT] += 1.0
        rows[pair] = w
    return TransitionModel(rows=rows, guards=default_guard_table())


def sample_intent(
    current: DyadState, scene: Scene, model: TransitionModel, rng: Rng
) -> AgentGazeState:
    """Sample the next intended self-state from the guarded, renormalized row.

    When guards block the entire row, falls back to PO: pursuing the gate
    is the one named path toward the more interactive states.
    """
    row = model.rows.get(current.pair)
    if row is None:
        raise TransitionModelError(f"missing transition row for pair {_pair_name(current.pair)}")
    allowed: list[tuple[AgentGazeState, float]] = []
    total = 0.0
    for state in STATE_ORDER:
        w = row.get(state, 0.0)
        if w > 0.0 and model.guards.allows(state, current, scene):
            allowed.append((state, w))
            total += w
    if total <= 0.0:
        return AgentGazeState.PO
    u = rng.random() * total
    acc = 0.0
    for state, w in allowed:
        acc += w
        if u < acc:
            return state
    return allowed[-1][0]


def plan_actions(
    intent: AgentGazeState,
    scene: Scene,
    profile: BehaviorProfile,
    rng: Rng,
    min_mutual_gaze: float = 0.5,
) -> list[GazeAction]:
    """Expand an intent into timed gaze actions.

    Initiating expands to the canonical two-step bid: fixate the partner's
    face long enough for mutual gaze, then shift to an object. Responding
    fixates the object of the partner's most recent attention shift, taken
    from the scene's partner_focus annotation.
    """
    s = AgentGazeState

    def timed(kind: ActionKind, object_id: str | None = None, min_hold: float = 0.0) -> GazeAction:
        onset = rng.exponential(profile.onset_latency_mean)
        hold = max(rng.exponential(profile.fixation_hold_mean), min_hold)
        return GazeAction(kind, object_id, onset_latency=onset, hold=hold)

    if intent is s.PO:
        return [timed(ActionKind.FIXATE_PARTNER)]
    if intent is s.INT:
        return [timed(ActionKind.IDLE)]
    if intent is s.OO:
        if not scene.objects:
            raise PlanningError("no referent available")
        obj = scene.objects[rng.index(len(scene.objects))]
        return [timed(ActionKind.FIXATE_OBJECT, obj.id)]
    if intent is s.IJA:
        if not scene.objects:
            raise PlanningError("no referent available")
        obj = scene.objects[rng.index(len(scene.objects))]
        return [
            timed(ActionKind.FIXATE_PARTNER, min_hold=min_mutual_gaze),
            timed(ActionKind.FIXATE_OBJECT, obj.id),
        ]
    if intent is s.RJA:
        focus = scene.partner_focus
        if focus is None or not scene.has_object(focus):
            raise PlanningError("no referent available")
        return [timed(ActionKind.FIXATE_OBJECT, focus)]
    raise PlanningError(f"unknown intent {intent!r}")


def apply_deixis(base: GazeAction) -> GazeTarget:
    """Where the eyes go for an action, honoring the pointing/speaking rules.

    Pointing keeps gaze on the pointed object unless speech co-occurs, in
    which case gaze goes to the partner; without pointing the action's
    natural target stands.
    """
    if base.pointing and base.speaking:
        return PARTNER
    if base.pointing and base.object_id is not None:
        return GazeTarget.object(base.object_id)
    if base.kind is ActionKind.FIXATE_PARTNER:
        return PARTNER
    if base.kind is ActionKind.FIXATE_OBJECT:
        assert base.object_id is not None
        return GazeTarget.object(base.object_id)
    return UNRESOLVED


def react_to_partner_pointing(object_id: str, scene: Scene, profile: BehaviorProfile) -> GazeAction:
    """Attend to the object the partner is pointing at, preempting the current action."""
    if not scene.has_object(object_id):
        raise PlanningError(f"unknown object id {object_id!r}")
    return GazeAction(
        ActionKind.FIXATE_OBJECT,
        object_id,
        onset_latency=0.0,
        hold=profile.fixation_hold_mean,
    )


@dataclass(frozen=True, slots=True)
class ControllerStep:
    """What one controller tick produced: a newly started action and, when the
    queue was refilled, the freshly sampled intent behind it."""

    emitted: GazeAction | None
    intent: AgentGazeState | None


class GazeController:
    """Single-session action scheduler over the sampled intents.

    Resamples only when its action queue runs out (or on preemption by
    partner pointing); per-tick resampling would starve the classifier of
    fixations longer than the minimum dwell. During an action's onset
    latency the previous gaze target is held; the target switches once the
    onset elapses.
    """

    def __init__(
        self,
        model: TransitionModel,
        profile: BehaviorProfile,
        rng: Rng,
        min_mutual_gaze: float = 0.5,
    ) -> None:
        self.model = model
        self.profile = profile
        self.rng = rng
        self.min_mutual_gaze = min_mutual_gaze
        self._queue: deque[GazeAction] = deque()
        self._active: GazeAction | None = None
        self._switch_at = 0.0
        self._active_until = 0.0
        self._target: GazeTarget = UNRESOLVED

    @property
    def current_target(self) -> GazeTarget:
        return self._target

    def preempt_with_pointing(self, object_id: str, scene: Scene) -> None:
        """Drop everything queued; react to the partner's pointing next step."""
        self._queue.clear()
        self._queue.append(react_to_partner_pointing(object_id, scene, self.profile))
        self._active = None
        self._active_until = 0.0

    def step(self, now: float, dyad: DyadState, scene: Scene) -> ControllerStep:
        """Advance to `now`; start the next action when the current one is done."""
        if self._active is not None and now >= self._switch_at:
            self._target = apply_deixis(self._active)
        if self._active is not None and now < self._active_until:
            return ControllerStep(None, None)

        intent: AgentGazeState | None = None
        if not self._queue:
            intent = sample_intent(dyad, scene, self.model, self.rng)
            self._queue.extend(plan_actions(intent, scene, self.profile, self.rng, self.min_mutual_gaze))
        action = self._queue.popleft()
        self._active = action
        self._switch_at = now + action.onset_latency
        self._active_until = self._switch_at + action.hold
        if now >= self._switch_at:
            self._target = apply_deixis(action)
        return ControllerStep(action, intent)
