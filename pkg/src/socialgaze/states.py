"""The five per-agent gaze states and the 5x5 dyad state space.

Per-agent classification is a deterministic rule cascade over recent
fixation history, evaluated in priority order IJA > RJA > PO > OO > INT:
joint-attention episodes subsume the partner/object fixations they are
built from. The dyad state is the ordered (self, other) pair plus a
stability flag (table-driven) and the gate flag, which marks the mutual
partner-oriented pair through which the more interactive states are
reached.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .events import Fixation
from .geometry import TargetKind


class AgentGazeState(Enum):
    PO = "PO"  # partner-oriented: attends exclusively to the partner's face
    OO = "OO"  # object-oriented: attends to objects, never the partner
    INT = "INT"  # introspective: attends to neither
    RJA = "RJA"  # responding joint attention: follows the partner's lead to an object
    IJA = "IJA"  # initiating joint attention: leads via mutual gaze, then an object


STATE_ORDER: tuple[AgentGazeState, ...] = (
    AgentGazeState.PO,
    AgentGazeState.OO,
    AgentGazeState.INT,
    AgentGazeState.RJA,
    AgentGazeState.IJA,
)

ALL_PAIRS: tuple[tuple[AgentGazeState, AgentGazeState], ...] = tuple(
    (s, o) for s in STATE_ORDER for o in STATE_ORDER
)


@dataclass(frozen=True, slots=True)
class StabilityTable:
    """Which of the 25 dyad pairs count as stable."""

    stable_pairs: frozenset[tuple[AgentGazeState, AgentGazeState]]

    def __post_init__(self) -> None:
        for pair in self.stable_pairs:
            if pair not in ALL_PAIRS:
                raise ValueError(f"not a dyad pair: {pair!r}")

    def is_stable(self, self_state: AgentGazeState, other_state: AgentGazeState) -> bool:
        return (self_state, other_state) in self.stable_pairs


def default_stability_table() -> StabilityTable:
    """Mutual and complementary pairs are stable; all mixed pairs are not.

    Both agents cannot simultaneously lead, so (IJA, IJA) is unstable while
    the complementary leader/follower pairs are stable.
    """
    s = AgentGazeState
    return StabilityTable(
        frozenset(
            {
                (s.PO, s.PO),
                (s.OO, s.OO),
                (s.INT, s.INT),
                (s.IJA, s.RJA),
                (s.RJA, s.IJA),
            }
        )
    )


@dataclass(frozen=True, slots=True)
class DyadState:
    self_state: AgentGazeState
    other_state: AgentGazeState
    stable: bool
    gate: bool

    @property
    def pair(self) -> tuple[AgentGazeState, AgentGazeState]:
        return (self.self_state, self.other_state)


def dyad_state(
    self_state: AgentGazeState, other_state: AgentGazeState, table: StabilityTable
) -> DyadState:
    """Form the ordered dyad pair; the gate flag is true exactly on (PO, PO)."""
    return DyadState(
        self_state=self_state,
        other_state=other_state,
        stable=table.is_stable(self_state, other_state),
        gate=self_state is AgentGazeState.PO and other_state is AgentGazeState.PO,
    )


@dataclass(frozen=True, slots=True)
class ClassifierConfig:
    window: float = 4.0  # seconds of history considered
    po_min_dwell: float = 0.5  # partner dwell needed for PO
    int_threshold: float = 1.5  # fixation-free time implying INT
    mutual_gaze_window: float = 0.5  # minimum mutual-gaze overlap
    follow_latency: float = 2.0  # max lag for a joint-attention follow

    def __post_init__(self) -> None:
        for name in ("window", "po_min_dwell", "int_threshold", "mutual_gaze_window", "follow_latency"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.follow_latency > self.window:
            raise ValueError("follow_latency cannot exceed the window")


def _check_ordered(fixations: list[Fixation], label: str) -> None:
    for prev, cur in zip(fixations, fixations[1:]):
        if cur.start < prev.end:
            raise ValueError(f"{label} fixations out of order or overlapping at t={cur.start}")


def _in_window(fixations: list[Fixation], now: float, window: float) -> list[Fixation]:
    lo = now - window
    return [f for f in fixations if f.end >= lo and f.start <= now]


def _next_after(fixations: list[Fixation], t: float) -> Fixation | None:
    for f in fixations:
        if f.start >= t:
            return f
    return None


def _mutual_gaze_pairs(
    own: list[Fixation], partner: list[Fixation], min_overlap: float
) -> list[tuple[Fixation, Fixation]]:
    """Partner-face fixation pairs whose temporal overlap reaches min_overlap."""
    face = TargetKind.PARTNER
    pairs = []
    for fa in own:
        if fa.target.kind is not face:
            continue
        for fb in partner:
            if fb.target.kind is not face:
                continue
            overlap = min(fa.end, fb.end) - max(fa.start, fb.start)
            if overlap >= min_overlap:
                pairs.append((fa, fb))
    return pairs


def classify_agent(
    now: float,
    own: list[Fixation],
    partner: list[Fixation],
    cfg: ClassifierConfig,
) -> AgentGazeState:
    """Classify agent A from its own and its partner's windowed fixations.

    Rules fire in priority order; the first match wins:

    * IJA: a mutual-gaze overlap of at least `mutual_gaze_window`, after
      which A's next fixation is an object starting while B is still on
      A's face (A shifted first).
    * RJA: a mutual-gaze overlap after which B shifts to an object first
      and A's next fixation lands on the same object within
      `follow_latency` of B's shift.
    * PO: A's most recent fixation is the partner's face with dwell of at
      least `po_min_dwell`, and A fixated no object in the window.
    * OO: A fixated at least one object and never the partner in the window.
    * INT: A has no fixation at all in the last `int_threshold` seconds.
    * Fallback by A's latest fixation target: object -> OO, partner -> PO,
      none -> INT.
    """
    own = _in_window(own, now, cfg.window)
    partner = _in_window(partner, now, cfg.window)
    _check_ordered(own, "own")
    _check_ordered(partner, "partner")

    mutual = _mutual_gaze_pairs(own, partner, cfg.mutual_gaze_window)
    obj, face = TargetKind.OBJECT, TargetKind.PARTNER

    for fa, fb in mutual:
        shift = _next_after(own, fa.end)
        if shift is not None and shift.target.kind is obj and shift.start < fb.end:
            return AgentGazeState.IJA

    for fa, fb in mutual:
        lead = _next_after(partner, fb.end)
        if lead is None or lead.target.kind is not obj:
            continue
        follow = _next_after(own, fa.end)
        if (
            follow is not None
            and follow.target == lead.target
            and lead.start <= follow.start <= lead.start + cfg.follow_latency
        ):
            return AgentGazeState.RJA

    has_object = any(f.target.kind is obj for f in own)
    has_partner = any(f.target.kind is face for f in own)

    if own and own[-1].target.kind is face and own[-1].duration >= cfg.po_min_dwell and not has_object:
        return AgentGazeState.PO
    if has_object and not has_partner:
        return AgentGazeState.OO
    if not any(f.end > now - cfg.int_threshold for f in own):
        return AgentGazeState.INT

    latest = own[-1]
    if latest.target.kind is obj:
        return AgentGazeState.OO
    if latest.target.kind is face:
        return AgentGazeState.PO
    return AgentGazeState.INT
