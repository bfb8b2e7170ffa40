"""Consensus sampling (CS), reliable consensus sampling (RCS) and the local-coin hybrid.

All three share one rejection loop: draw from the uniform mixture, accept with
probability sigma(y) using one uniform variate per round. CS abstains after
``R`` rejections. RCS buffers every rejected candidate and falls back to the
trace phase. The local-coin variant flips a coin between the two.

The loop reads only ``group.probs`` and ``group.s``; truth labels are never
consulted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .dist import ModelGroup, mixture_draw, sigma
from .errors import EmptyBuffer


class Phase(str, Enum):
    ACCEPT = "accept"
    TRACE = "trace"
    ABSTAIN = "abstain"


@dataclass(frozen=True)
class LatencyModel:
    """Abstract latency units: ``per_round`` per sampling round, plus
    ``trace_coeff * n^2 * log2(n)`` whenever the trace phase runs."""

    per_round: float = 1.0
    trace_coeff: float = 1e-6

    def trace_surcharge(self, n: int) -> float:
        return self.trace_coeff * n * n * math.log2(n) if n > 1 else 0.0

    def cost(self, rounds: int, n: int, traced: bool) -> float:
        return rounds * self.per_round + (self.trace_surcharge(n) if traced else 0.0)


DEFAULT_LATENCY = LatencyModel()


@dataclass(frozen=True, eq=False)
class BufferEntry:
    y: int
    sigma_val: float
    stats: np.ndarray
    origin: int
    round: int

    def alpha(self, s: int) -> float:
        """Sum of the ``n - s`` largest probabilities at ``y``."""
        return float(self.stats[s:].sum())


@dataclass(frozen=True, eq=False)
class Outcome:
    phase: Phase
    rounds_used: int
    latency_units: float
    y: int | None = None
    origin: int | None = None
    buffer: tuple[BufferEntry, ...] = ()

    @property
    def abstained(self) -> bool:
        return self.phase is Phase.ABSTAIN

    @property
    def delivered(self) -> bool:
        return self.phase is not Phase.ABSTAIN

    def key(self) -> tuple:
        """Hashable summary used for equality checks in tests and reports."""
        return (self.phase.value, self.y, self.origin, self.rounds_used, self.latency_units)


def rank_for_trace(entries: Sequence, u: int) -> list:
    """Top ``u`` entries by sigma (descending), ties to earlier round then lower y."""
    return sorted(entries, key=lambda e: (-e.sigma_val, e.round, e.y))[:u]


def trace_choice(entries: Sequence, s: int, R: int, alpha) -> object:
    """Shared trace rule, generic over the numeric type of sigma and alpha.

    ``alpha`` maps an entry to the sum of its largest ``n - s`` probabilities.
    The winner maximises alpha; ties go to higher sigma, earlier round, lower y.
    """
    if not entries:
        raise EmptyBuffer("trace phase reached with an empty buffer")
    top = rank_for_trace(entries, min(s, R))
    return min(top, key=lambda e: (-alpha(e), -e.sigma_val, e.round, e.y))


def trace_select(buffer: Sequence[BufferEntry], group: ModelGroup, R: int) -> BufferEntry:
    return trace_choice(buffer, group.s, R, lambda e: e.alpha(group.s))


def _rejection_rounds(group: ModelGroup, R: int, rng: np.random.Generator):
    """Run up to ``R`` rounds. Returns ``(accepted_entry | None, buffer)``."""
    if R < 1:
        raise ValueError(f"R must be at least 1, got {R}")
    buffer: list[BufferEntry] = []
    for r in range(1, R + 1):
        y, origin = mixture_draw(group, rng)
        sig, stats = sigma(group, y)
        entry = BufferEntry(y, sig, stats, origin, r)
        if rng.random() < sig:
            return entry, buffer
        buffer.append(entry)
    return None, buffer


def _accepted(entry: BufferEntry, group: ModelGroup, latency: LatencyModel) -> Outcome:
    return Outcome(Phase.ACCEPT, entry.round, latency.cost(entry.round, group.n, False),
                   entry.y, entry.origin)


def _traced(buffer: list[BufferEntry], group: ModelGroup, R: int, latency: LatencyModel) -> Outcome:
    win = trace_select(buffer, group, R)
    return Outcome(Phase.TRACE, R, latency.cost(R, group.n, True), win.y, win.origin, tuple(buffer))


def run_cs(group: ModelGroup, R: int, rng: np.random.Generator,
           latency: LatencyModel = DEFAULT_LATENCY) -> Outcome:
    entry, buffer = _rejection_rounds(group, R, rng)
    if entry is not None:
        return _accepted(entry, group, latency)
    return Outcome(Phase.ABSTAIN, R, latency.cost(R, group.n, False), buffer=tuple(buffer))


def run_rcs(group: ModelGroup, R: int, rng: np.random.Generator,
            latency: LatencyModel = DEFAULT_LATENCY) -> Outcome:
    entry, buffer = _rejection_rounds(group, R, rng)
    if entry is not None:
        return _accepted(entry, group, latency)
    return _traced(buffer, group, R, latency)


def run_rcs_coin(group: ModelGroup, R: int, rng: np.random.Generator,
                 latency: LatencyModel = DEFAULT_LATENCY) -> Outcome:
    entry, buffer = _rejection_rounds(group, R, rng)
    if entry is not None:
        return _accepted(entry, group, latency)
    if int(rng.integers(2)) == 0:
        return Outcome(Phase.ABSTAIN, R, latency.cost(R, group.n, False), buffer=tuple(buffer))
    return _traced(buffer, group, R, latency)


PROTOCOLS = {
    "CS": run_cs,
    "RCS": run_rcs,
    "RCS_COIN": run_rcs_coin,
}
