import numpy as np
import pytest

from rcs.dist import ModelGroup, OutputSpace
from rcs.errors import GroupExhausted, NoExclusions
from rcs.feedback import (ExclusionRegistry, FeedbackRecord, FeedbackSession, Verdict, eval_oracle,
                          feedback_accuracy, frcs_run, update_registry)
from rcs.protocols import Phase, run_rcs

from conftest import philox


def test_empty_registry_matches_rcs(worked):
    for seed in range(100):
        out, rec = frcs_run(worked, "t", ExclusionRegistry(), 2, philox(seed))
        assert out.key() == run_rcs(worked, 2, philox(seed)).key()
        assert rec.provenance == out.origin


def test_phi_max_on_colluder_delivery(worked):
    for seed in range(200):
        out, rec = frcs_run(worked, "t", ExclusionRegistry(), 2, philox(seed))
        if out.y == 2:
            assert rec.phi_max == 2
            break
    else:
        pytest.fail("colluder response never delivered")


def test_phi_max_is_argmax(worked):
    reg = ExclusionRegistry()
    for seed in range(50):
        out, rec = frcs_run(worked, "t", reg, 2, philox(seed))
        col = worked.probs[:, out.y]
        assert col[rec.phi_max] == col.max()
        assert col[rec.phi_min] == col.min()
    assert [r.timestamp for r in reg.history] == list(range(50))


def test_excluding_colluders_removes_attack():
    space = OutputSpace(3, frozenset({2}))
    g = ModelGroup.from_models([[0.6, 0.4, 0], [0.5, 0.5, 0], [0.7, 0.3, 0], [0, 0, 1.0], [0, 0, 1.0]],
                               3, space, truth_labels=(True, True, True, False, False))
    reg = ExclusionRegistry({"t": {3, 4}})
    for seed in range(300):
        out, rec = frcs_run(g, "t", reg, 3, philox(seed))
        assert out.origin in (0, 1, 2) and out.y != 2
        assert all(e.origin in (0, 1, 2) for e in out.buffer)


def test_exclusions_are_per_task(worked):
    reg = ExclusionRegistry({"other": {0, 1}})
    out, _ = frcs_run(worked, "t", reg, 2, philox(0))
    assert out.key() == run_rcs(worked, 2, philox(0)).key()


def test_group_exhausted(worked):
    with pytest.raises(GroupExhausted):
        frcs_run(worked, "t", ExclusionRegistry({"t": {0, 2}}), 2, philox(0))


def test_eval_oracle(worked):
    assert eval_oracle(0, worked.space) is Verdict.SAFE
    assert eval_oracle(2, worked.space) is Verdict.UNSAFE
    assert all(eval_oracle(2, worked.space) is Verdict.UNSAFE for _ in range(5))


def test_update_registry():
    reg = ExclusionRegistry()
    rec = FeedbackRecord(phi_max=2, task="t", y=2, provenance=2, timestamp=0)
    update_registry(reg, rec, Verdict.SAFE)
    assert reg.excluded == {}
    update_registry(reg, rec, Verdict.UNSAFE)
    update_registry(reg, rec, Verdict.UNSAFE)
    assert reg.excluded == {"t": {2}}
    assert rec.self_entangled


def test_feedback_accuracy(worked):
    assert feedback_accuracy(ExclusionRegistry({"t": {2}}), worked) == 1.0
    assert feedback_accuracy(ExclusionRegistry({"t": {0, 2}}), worked) == 0.5
    with pytest.raises(NoExclusions):
        feedback_accuracy(ExclusionRegistry(), worked)


def test_session_delay_and_monotone_exclusions(worked):
    session = FeedbackSession("t", worked.space, 2, delay=3)
    rng = philox(7)
    seen = frozenset()
    first_unsafe = None
    for step in range(60):
        out, rec = session.step(worked, rng)
        now = session.registry.excluded_for("t")
        assert seen <= now
        seen = now
        if first_unsafe is None and out.y == 2:
            first_unsafe = step
        if first_unsafe is not None and step < first_unsafe + 3:
            assert 2 not in now
    assert first_unsafe is not None
    session.drain(worked.n)
    assert session.registry.excluded_for("t") == {2}
    assert feedback_accuracy(session.registry, worked) == 1.0


def test_session_never_exhausts_group():
    space = OutputSpace(2, frozenset({1}))
    g = ModelGroup.from_models([[0.0, 1.0], [0.0, 1.0], [0.5, 0.5]], 2, space,
                               truth_labels=(False, False, True))
    session = FeedbackSession("t", space, 2, delay=0)
    rng = philox(3)
    for _ in range(40):
        out, _ = session.step(g, rng)
        assert out.phase is not Phase.ABSTAIN
    assert len(session.registry.excluded_for("t")) <= 1
