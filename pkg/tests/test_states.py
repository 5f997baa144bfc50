from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socialgaze.events import Fixation
from socialgaze.geometry import Agent, GazeTarget, PARTNER
from socialgaze.states import (
    ALL_PAIRS,
    AgentGazeState,
    ClassifierConfig,
    StabilityTable,
    classify_agent,
    default_stability_table,
    dyad_state,
)

from conftest import fix

S = AgentGazeState
CUBE = GazeTarget.object("cube")
BALL = GazeTarget.object("ball")


def own(*fs) -> list[Fixation]:
    return [fix(Agent.SELF, t, a, b) for t, a, b in fs]


def other(*fs) -> list[Fixation]:
    return [fix(Agent.OTHER, t, a, b) for t, a, b in fs]


# --- independent reference pattern-matcher ----------------------------------------


def reference_classify(now, a_fixations, b_fixations, cfg: ClassifierConfig) -> AgentGazeState:
    """Batch matcher over the whole window, written as explicit set scans."""
    lo = now - cfg.window
    A = [f for f in a_fixations if f.end >= lo and f.start <= now]
    B = [f for f in b_fixations if f.end >= lo and f.start <= now]

    def first_from(fs, t):
        later = [f for f in fs if f.start >= t]
        return min(later, key=lambda f: f.start) if later else None

    episodes = [
        (fa, fb)
        for fa in A
        if fa.target.is_partner
        for fb in B
        if fb.target.is_partner
        and min(fa.end, fb.end) - max(fa.start, fb.start) >= cfg.mutual_gaze_window
    ]

    if any(
        (shift := first_from(A, fa.end)) is not None
        and shift.target.is_object
        and shift.start < fb.end
        for fa, fb in episodes
    ):
        return S.IJA

    for fa, fb in episodes:
        lead = first_from(B, fb.end)
        if lead is None or not lead.target.is_object:
            continue
        follow = first_from(A, fa.end)
        if (
            follow is not None
            and follow.target == lead.target
            and lead.start <= follow.start <= lead.start + cfg.follow_latency
        ):
            return S.RJA

    objects = [f for f in A if f.target.is_object]
    faces = [f for f in A if f.target.is_partner]
    if A and A[-1].target.is_partner and A[-1].duration >= cfg.po_min_dwell and not objects:
        return S.PO
    if objects and not faces:
        return S.OO
    if all(f.end <= now - cfg.int_threshold for f in A):
        return S.INT
    return {True: S.OO, False: S.PO}[A[-1].target.is_object] if A else S.INT


# --- definitional cases -------------------------------------------------------------


def test_recent_partner_dwell_is_partner_oriented():
    cfg = ClassifierConfig()
    got = classify_agent(2.0, own((PARTNER, 0.8, 2.0)), [], cfg)
    assert got is S.PO


def test_only_object_fixations_is_object_oriented():
    cfg = ClassifierConfig()
    got = classify_agent(2.0, own((CUBE, 0.0, 0.7), (BALL, 1.0, 1.9)), [], cfg)
    assert got is S.OO


def test_no_fixations_at_all_is_introspective():
    cfg = ClassifierConfig()
    assert classify_agent(1.5, [], [], cfg) is S.INT


def test_stale_object_fixation_in_window_is_still_object_oriented():
    # OO outranks INT in the cascade, so an old object dwell inside the
    # window wins over fixation-free recency
    cfg = ClassifierConfig()
    got = classify_agent(3.0, own((CUBE, 0.5, 3.0 - cfg.int_threshold)), [], cfg)
    assert got is S.OO


def test_stale_short_partner_dwell_is_introspective():
    cfg = ClassifierConfig()
    # dwell under po_min_dwell, ending exactly int_threshold ago: PO and OO
    # both fail, and a fixation ending on the boundary does not count as recent
    got = classify_agent(3.0, own((PARTNER, 1.1, 3.0 - cfg.int_threshold)), [], cfg)
    assert got is S.INT


def test_mutual_gaze_then_own_shift_while_partner_holds_is_initiating():
    cfg = ClassifierConfig()
    a = own((PARTNER, 0.0, 1.0), (CUBE, 1.1, 1.7))
    b = other((PARTNER, 0.2, 1.5))
    got = classify_agent(2.0, a, b, cfg)
    assert got is S.IJA
    assert reference_classify(2.0, a, b, cfg) is S.IJA


def test_following_partner_shift_to_same_object_is_responding():
    cfg = ClassifierConfig()
    a = own((PARTNER, 0.0, 1.2), (BALL, 1.8, 2.4))
    b = other((PARTNER, 0.0, 1.0), (BALL, 1.0, 1.8))
    got = classify_agent(2.5, a, b, cfg)
    assert got is S.RJA
    assert reference_classify(2.5, a, b, cfg) is S.RJA


def test_follow_after_latency_is_not_responding():
    cfg = ClassifierConfig(window=8.0, follow_latency=2.0)
    a = own((PARTNER, 0.0, 1.2), (BALL, 3.5, 4.2))  # 2.5 s after the partner's shift
    b = other((PARTNER, 0.0, 1.0), (BALL, 1.0, 1.8))
    got = classify_agent(4.5, a, b, cfg)
    assert got is not S.RJA


def test_initiating_beats_a_partner_oriented_looking_tail():
    cfg = ClassifierConfig()
    # the latest fixation alone reads as PO; the earlier episode must win
    a = own((PARTNER, 0.0, 1.0), (CUBE, 1.05, 1.4), (PARTNER, 1.5, 3.0))
    b = other((PARTNER, 0.2, 1.2))
    assert classify_agent(3.0, a, b, cfg) is S.IJA


def test_mixed_targets_without_episode_fall_back_to_latest():
    cfg = ClassifierConfig()
    a = own((CUBE, 0.0, 0.6), (PARTNER, 2.6, 2.9))  # short face dwell, no overlap
    got = classify_agent(3.0, a, [], cfg)
    assert got is S.PO  # latest fixation is the partner
    a = own((PARTNER, 0.0, 0.4), (CUBE, 2.6, 2.9))
    assert classify_agent(3.0, a, [], cfg) is S.OO


def test_unordered_input_is_rejected():
    cfg = ClassifierConfig()
    a = own((PARTNER, 1.0, 2.0), (CUBE, 0.0, 0.5))
    with pytest.raises(ValueError, match="out of order"):
        classify_agent(2.5, a, [], cfg)


# --- dyad state and stability ---------------------------------------------------------


def test_gate_fires_exactly_on_mutual_partner_orientation():
    table = default_stability_table()
    d = dyad_state(S.PO, S.PO, table)
    assert d.gate and d.stable
    for pair in ALL_PAIRS:
        d = dyad_state(pair[0], pair[1], table)
        assert d.gate == (pair == (S.PO, S.PO))


def test_dyad_pairs_enumerate_to_twenty_five():
    assert len(ALL_PAIRS) == len(set(ALL_PAIRS)) == 25


def test_default_stability_membership():
    table = default_stability_table()
    assert table.is_stable(S.PO, S.PO)
    assert table.is_stable(S.IJA, S.RJA)
    assert table.is_stable(S.RJA, S.IJA)
    assert table.is_stable(S.OO, S.OO)
    assert table.is_stable(S.INT, S.INT)
    assert not table.is_stable(S.IJA, S.IJA)
    assert len(table.stable_pairs) == 5


def test_custom_stability_table_is_honored():
    table = StabilityTable(frozenset({(S.OO, S.PO)}))
    assert dyad_state(S.OO, S.PO, table).stable
    assert not dyad_state(S.PO, S.PO, table).stable


def test_bogus_stability_pair_rejected():
    with pytest.raises(ValueError, match="not a dyad pair"):
        StabilityTable(frozenset({(S.PO, "XX")}))  # type: ignore[arg-type]


# --- randomized agreement and invariance ------------------------------------------------

GRID = 1.0 / 64.0  # dyadic grid keeps shifted-time arithmetic exact


def random_history(rng, agent: Agent, max_fix: int, horizon: float) -> list[Fixation]:
    targets = [PARTNER, CUBE, BALL, GazeTarget.object("pen")]
    out = []
    t = rng.randrange(0, 32) * GRID
    for _ in range(rng.randrange(0, max_fix + 1)):
        dur = rng.randrange(13, 96) * GRID  # ~0.2 .. 1.5 s
        if t + dur > horizon:
            break
        out.append(Fixation(agent, rng.choice(targets), t, t + dur))
        t += dur + rng.randrange(0, 64) * GRID
    return out


@settings(max_examples=400, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_classifier_matches_reference_on_random_histories(seed):
    from conftest import seeded

    rng = seeded(seed)
    cfg = ClassifierConfig()
    a = random_history(rng, Agent.SELF, 20, 10.0)
    b = random_history(rng, Agent.OTHER, 20, 10.0)
    now = 10.0 + rng.randrange(0, 32) * GRID
    assert classify_agent(now, a, b, cfg) is reference_classify(now, a, b, cfg)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.integers(-512, 512))
def test_classification_is_time_translation_invariant(seed, shift):
    from conftest import seeded

    rng = seeded(seed)
    cfg = ClassifierConfig()
    a = random_history(rng, Agent.SELF, 12, 8.0)
    b = random_history(rng, Agent.OTHER, 12, 8.0)
    now = 8.5
    dt = shift * GRID

    def shifted(fs):
        return [Fixation(f.agent, f.target, f.start + dt, f.end + dt) for f in fs]

    assert classify_agent(now, a, b, cfg) is classify_agent(now + dt, shifted(a), shifted(b), cfg)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_online_window_pruning_agrees_with_batch_at_every_tick(seed):
    from conftest import seeded

    rng = seeded(seed)
    cfg = ClassifierConfig()
    a = random_history(rng, Agent.SELF, 20, 10.0)
    b = random_history(rng, Agent.OTHER, 20, 10.0)
    tick = 0.25
    for k in range(0, 44):
        now = k * tick
        a_pruned = [f for f in a if f.end >= now - cfg.window and f.start <= now]
        b_pruned = [f for f in b if f.end >= now - cfg.window and f.start <= now]
        online = classify_agent(now, a_pruned, b_pruned, cfg)
        batch = classify_agent(now, [f for f in a if f.start <= now], [f for f in b if f.start <= now], cfg)
        assert online is batch


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_every_history_maps_to_exactly_one_state(seed):
    from conftest import seeded

    rng = seeded(seed)
    cfg = ClassifierConfig()
    a = random_history(rng, Agent.SELF, 20, 12.0)
    b = random_history(rng, Agent.OTHER, 20, 12.0)
    got = classify_agent(12.5, a, b, cfg)
    assert isinstance(got, AgentGazeState)
