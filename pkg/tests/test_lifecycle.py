import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neusymms.lifecycle import (
    PROMOTION_REASON,
    PRUNE_REASON,
    LifecyclePolicy,
    promote_eligible,
    prune,
    run_job,
)
from neusymms.model import Actor, Category, MemoryType
from neusymms.replay import MutableClock
from neusymms.store import EventKind, FactQuery, FactStore
from util import START, hours, make_fact


def seed(store, n, accesses=0, long_term=False, user="u1"):
    fact = store.insert(make_fact(
        n, user_id=user, relation=f"rel_{n}", value=f"value {n}",
        category=Category.TASK,
        memory_type=MemoryType.LONG_TERM if long_term else MemoryType.SHORT_TERM))
    for _ in range(accesses):
        store.touch([fact.id])
    return store.get(fact.id)


class TestPromotion:
    def test_threshold_reached(self, store):
        fact = seed(store, 1, accesses=3)
        batches = promote_eligible(store, LifecyclePolicy(), user_id="u1")
        assert [d.target_fact_id for _u, ds in batches for d in ds] == [fact.id]

    def test_below_threshold_untouched(self, store):
        seed(store, 1, accesses=2)
        assert promote_eligible(store, LifecyclePolicy(), user_id="u1") == []

    def test_long_term_never_re_promoted(self, store):
        seed(store, 1, accesses=50, long_term=True)
        assert promote_eligible(store, LifecyclePolicy(), user_id="u1") == []

    def test_promotion_journaled_with_reason(self, store):
        fact = seed(store, 1, accesses=3)
        for user, decisions in promote_eligible(store, LifecyclePolicy()):
            store.apply_decisions(user, decisions, actor=Actor.LIFECYCLE)
        assert store.get(fact.id).memory_type == MemoryType.LONG_TERM
        promote_events = [e for e in store.journal_events()
                          if e.kind == EventKind.DECISION_APPLIED
                          and e.decision and e.decision.reason == PROMOTION_REASON]
        assert len(promote_events) == 1


class TestPrune:
    def test_stale_unread_fact_pruned(self, store, clock):
        fact = seed(store, 1)
        clock.advance(hours(25))
        assert prune(store, LifecyclePolicy()) == [fact.id]
        assert store.get(fact.id).is_active is False

    def test_access_above_ceiling_kept(self, store, clock):
        seed(store, 1, accesses=1)
        clock.advance(hours(25))
        assert prune(store, LifecyclePolicy()) == []

    def test_long_term_exempt(self, store, clock):
        seed(store, 1, long_term=True)
        clock.advance(hours(24 * 365))
        assert prune(store, LifecyclePolicy()) == []

    def test_fresh_fact_kept(self, store, clock):
        seed(store, 1)
        clock.advance(hours(23))
        assert prune(store, LifecyclePolicy()) == []

    def test_prune_reason_journaled(self, store, clock):
        fact = seed(store, 1)
        clock.advance(hours(25))
        prune(store, LifecyclePolicy())
        last = [e for e in store.journal_events()
                if e.kind == EventKind.FACT_DEACTIVATED][-1]
        assert last.detail["reason"] == PRUNE_REASON
        assert last.actor == Actor.LIFECYCLE
        assert last.fact.id == fact.id

    def test_custom_ceiling(self, store, clock):
        fact = seed(store, 1, accesses=2)
        clock.advance(hours(25))
        policy = LifecyclePolicy(prune_access_ceiling=2)
        assert prune(store, policy) == [fact.id]


class TestRunJob:
    def test_empty_store(self, store):
        report = run_job(store, LifecyclePolicy())
        assert report.promoted == 0 and report.pruned == 0 and report.users == 0

    def test_promotes_then_prunes_across_users(self, store, clock):
        hot = seed(store, 1, accesses=3, user="u1")
        seed(store, 2, user="u1")
        seed(store, 3, user="u2")
        clock.advance(hours(25))
        report = run_job(store, LifecyclePolicy())
        assert report.users == 2
        assert report.promoted == 1
        assert report.pruned == 2
        assert store.get(hot.id).memory_type == MemoryType.LONG_TERM
        assert store.get(hot.id).is_active  # promoted fact not pruned

    def test_idempotent_at_fixed_now(self, store, clock):
        seed(store, 1, accesses=3)
        seed(store, 2)
        clock.advance(hours(25))
        now = clock()
        first = run_job(store, LifecyclePolicy(), now=now)
        second = run_job(store, LifecyclePolicy(), now=now)
        assert first.promoted == 1 and first.pruned == 1
        assert second.promoted == 0 and second.pruned == 0

    def test_one_user_failure_does_not_abort_others(self, store, monkeypatch):
        seed(store, 1, accesses=3, user="u1")
        seed(store, 2, accesses=3, user="u2")
        original = store.apply_decisions

        def flaky(user_id, decisions, actor=Actor.ENGINE):
            if user_id == "u1":
                raise RuntimeError("disk on fire")
            return original(user_id, decisions, actor=actor)

        monkeypatch.setattr(store, "apply_decisions", flaky)
        report = run_job(store, LifecyclePolicy())
        assert "u1" in report.errors
        assert report.promoted == 1  # u2 still processed


class TestJobChangeEndState:
    def test_25h_job_keeps_long_term_prunes_leftover_context(self, store, clock):
        # end state of the employer-change scenario plus one unread
        # short-term context fact
        from neusymms.extraction import ConversationTurn, TurnRole
        from neusymms.pipeline import MemoryEngine

        engine = MemoryEngine(store)
        engine.process_memory("u1", [ConversationTurn(
            TurnRole.USER,
            "I just started a new job at Google in Mountain View. I speak Python and Go.")])
        leftover = store.insert(make_fact(
            50, relation="currently_discussing", value="onboarding",
            category=Category.CONTEXT, memory_type=MemoryType.SHORT_TERM))
        clock.advance(hours(25))
        report = run_job(store, LifecyclePolicy(), now=clock())
        assert report.pruned == 1
        assert store.get(leftover.id).is_active is False
        skills = store.query(FactQuery(user_id="u1", category=Category.SKILL))
        assert len(skills) == 2  # long-term facts survive any amount of time


class TestPolicyValidation:
    def test_bounds(self):
        with pytest.raises(ValueError):
            LifecyclePolicy(promotion_threshold=0)
        with pytest.raises(ValueError):
            LifecyclePolicy(short_term_ttl_hours=0)


class TestLifecycleProperties:
    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(
        st.integers(min_value=0, max_value=5),   # access count
        st.booleans(),                            # long term?
        st.floats(min_value=0, max_value=50)),    # age hours
        min_size=1, max_size=8))
    def test_prune_never_touches_long_term_or_read_facts(self, rows):
        clock = MutableClock(START)
        store = FactStore(clock=clock)
        facts = []
        for i, (accesses, long_term, age_hours) in enumerate(rows):
            fact = seed(store, i + 1, accesses=accesses, long_term=long_term)
            facts.append((fact, age_hours))
        # every fact was created at START; one advance gives them all one age
        clock.advance(hours(max(r[2] for r in rows)))
        policy = LifecyclePolicy()
        pruned = set(prune(store, policy))
        for fact, _age in facts:
            current = store.get(fact.id)
            if fact.memory_type == MemoryType.LONG_TERM:
                assert fact.id not in pruned
            if fact.access_count > policy.prune_access_ceiling:
                assert fact.id not in pruned
            if fact.id not in pruned:
                assert current.is_active

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(min_value=0, max_value=6), min_size=1, max_size=6))
    def test_promotion_monotone(self, access_counts):
        clock = MutableClock(START)
        store = FactStore(clock=clock)
        for i, accesses in enumerate(access_counts):
            seed(store, i + 1, accesses=accesses)
        run_job(store, LifecyclePolicy())
        before = {f.id: f.memory_type for f in store.all_facts()}
        run_job(store, LifecyclePolicy())
        for fact in store.all_facts():
            if before[fact.id] == MemoryType.LONG_TERM:
                assert fact.memory_type == MemoryType.LONG_TERM
