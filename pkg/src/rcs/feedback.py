"""Feedback-optimised RCS: exclude models implicated in unsafe deliveries.

After each run the model assigning the highest probability to the delivered
response (``phi_max``) is recorded. When a delayed evaluation later judges
that response unsafe, ``phi_max`` is excluded from future runs on the same
task class. Exclusions are per task class and never revoked.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .dist import ModelGroup, OutputSpace
from .errors import GroupExhausted, NoExclusions
from .protocols import DEFAULT_LATENCY, LatencyModel, Outcome, run_rcs

TaskClass = str


class Verdict(str, Enum):
    SAFE = "safe"
    UNSAFE = "unsafe"


@dataclass(frozen=True)
class FeedbackRecord:
    phi_max: int
    task: TaskClass
    y: int
    provenance: int
    timestamp: int
    phi_min: int | None = None

    @property
    def self_entangled(self) -> bool:
        return self.phi_max == self.provenance


@dataclass
class ExclusionRegistry:
    excluded: dict[TaskClass, set[int]] = field(default_factory=dict)
    history: list[FeedbackRecord] = field(default_factory=list)

    def excluded_for(self, task: TaskClass) -> frozenset[int]:
        return frozenset(self.excluded.get(task, ()))

    def all_exclusions(self) -> list[int]:
        """Excluded model indices over every task class, as a multiset."""
        return [m for task in sorted(self.excluded) for m in sorted(self.excluded[task])]

    def to_rows(self) -> list[dict]:
        return [
            {"timestamp": r.timestamp, "task": r.task, "y": r.y, "provenance": r.provenance,
             "phi_max": r.phi_max, "phi_min": r.phi_min, "self_entangled": r.self_entangled}
            for r in self.history
        ]


def eval_oracle(y: int, space: OutputSpace) -> Verdict:
    return Verdict.UNSAFE if space.is_unsafe(y) else Verdict.SAFE


def frcs_run(group: ModelGroup, task: TaskClass, registry: ExclusionRegistry, R: int,
             rng: np.random.Generator,
             latency: LatencyModel = DEFAULT_LATENCY) -> tuple[Outcome, FeedbackRecord]:
    """Run RCS on the models not excluded for ``task`` and record ``phi_max``.

    The declared ``s`` is kept, capped at the number of remaining models.
    Indices in the returned outcome and record refer to the full group.
    """
    banned = registry.excluded_for(task)
    active = [i for i in range(group.n) if i not in banned]
    if len(active) < 2:
        raise GroupExhausted(f"task {task!r}: only {len(active)} model(s) left after exclusions")
    sub = group if not banned else group.subset(active, s=min(group.s, len(active)))
    outcome = run_rcs(sub, R, rng, latency)
    if banned:
        buffer = tuple(replace(e, origin=active[e.origin]) for e in outcome.buffer)
        outcome = replace(outcome, origin=active[outcome.origin], buffer=buffer)
    column = sub.probs[:, outcome.y]
    record = FeedbackRecord(
        phi_max=active[int(np.argmax(column))],
        task=task,
        y=outcome.y,
        provenance=outcome.origin,
        timestamp=len(registry.history),
        phi_min=active[int(np.argmin(column))],
    )
    registry.history.append(record)
    return outcome, record


def update_registry(registry: ExclusionRegistry, record: FeedbackRecord,
                    verdict: Verdict) -> ExclusionRegistry:
    if verdict is Verdict.UNSAFE:
        registry.excluded.setdefault(record.task, set()).add(record.phi_max)
    return registry


def feedback_accuracy(registry: ExclusionRegistry, group: ModelGroup) -> float:
    """Share of excluded models that are truly Byzantine."""
    if group.truth_labels is None:
        raise ValueError("feedback accuracy needs truth labels")
    flagged = registry.all_exclusions()
    if not flagged:
        raise NoExclusions("no model has been excluded yet")
    return sum(not group.truth_labels[m] for m in flagged) / len(flagged)


class FeedbackSession:
    """A sequence of F-RCS runs on one task class with delayed evaluation.

    Verdicts for the run at step ``t`` are applied before step ``t + delay``.
    An exclusion that would leave fewer than two models is skipped and
    counted in ``skipped``.
    """

    def __init__(self, task: TaskClass, space: OutputSpace, R: int, delay: int = 1,
                 latency: LatencyModel = DEFAULT_LATENCY):
        if delay < 0:
            raise ValueError("delay must be non-negative")
        self.task, self.space, self.R, self.delay = task, space, R, delay
        self.latency = latency
        self.registry = ExclusionRegistry()
        self.skipped = 0
        self._pending: deque[tuple[int, FeedbackRecord]] = deque()
        self._step = 0

    def _flush(self, n_models: int, upto: int) -> None:
        while self._pending and self._pending[0][0] <= upto:
            _, record = self._pending.popleft()
            verdict = eval_oracle(record.y, self.space)
            current = self.registry.excluded_for(record.task)
            if (verdict is Verdict.UNSAFE and record.phi_max not in current
                    and n_models - len(current) - 1 < 2):
                self.skipped += 1
                continue
            update_registry(self.registry, record, verdict)

    def step(self, group: ModelGroup, rng: np.random.Generator) -> tuple[Outcome, FeedbackRecord]:
        self._flush(group.n, self._step)
        outcome, record = frcs_run(group, self.task, self.registry, self.R, rng, self.latency)
        self._pending.append((self._step + self.delay, record))
        self._step += 1
        return outcome, record

    def drain(self, n_models: int) -> None:
        """Apply every outstanding verdict."""
        self._flush(n_models, float("inf"))
