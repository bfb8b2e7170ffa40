"""Finite output distributions, model groups and the consensus statistics.

Every protocol in the package works on a :class:`ModelGroup`: ``n`` probability
vectors over one integer-indexed output space plus the declared number ``s``
of safe models. The acceptance ratio and the overlap are built from order
statistics of the per-model probabilities at a single response.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import IndexOutOfSpace, NegativeMass, NotNormalized, ZeroMixtureMass

NORM_TOL = 1e-9


@dataclass(frozen=True)
class OutputSpace:
    """``size`` responses indexed ``0..size-1``; ``unsafe`` is the set U."""

    size: int
    unsafe: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"output space needs at least one response, got {self.size}")
        object.__setattr__(self, "unsafe", frozenset(int(i) for i in self.unsafe))
        bad = [i for i in self.unsafe if not 0 <= i < self.size]
        if bad:
            raise IndexOutOfSpace(f"unsafe indices {sorted(bad)} outside space of size {self.size}")

    @property
    def safe(self) -> frozenset[int]:
        return frozenset(range(self.size)) - self.unsafe

    @cached_property
    def unsafe_mask(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        mask[sorted(self.unsafe)] = True
        mask.flags.writeable = False
        return mask

    def check_index(self, y: int) -> int:
        if not 0 <= y < self.size:
            raise IndexOutOfSpace(f"response {y} outside space of size {self.size}")
        return int(y)

    def is_unsafe(self, y: int) -> bool:
        return self.check_index(y) in self.unsafe


def validate(probs: Sequence[float] | np.ndarray, tol: float = NORM_TOL) -> bool:
    """Return True for a valid probability vector, raise otherwise."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise NotNormalized(f"expected a non-empty vector, got shape {p.shape}")
    if np.any(p < 0):
        raise NegativeMass(f"negative entry {p.min()!r} at index {int(np.argmin(p))}")
    total = float(p.sum())
    if abs(total - 1.0) > tol:
        raise NotNormalized(f"entries sum to {total!r}")
    return True


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        validate(p)
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @classmethod
    def normalized(cls, weights: Iterable[float]) -> "FiniteDistribution":
        w = np.asarray(list(weights) if not isinstance(weights, np.ndarray) else weights, dtype=float)
        if np.any(w < 0):
            raise NegativeMass(f"negative weight {w.min()!r}")
        return cls(w / w.sum())

    @classmethod
    def point_mass(cls, size: int, y: int) -> "FiniteDistribution":
        p = np.zeros(size)
        p[y] = 1.0
        return cls(p)

    def __len__(self) -> int:
        return self.probs.size

    def __eq__(self, other):
        if not isinstance(other, FiniteDistribution):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    __hash__ = None


def cumulative_mass(dist: FiniteDistribution | np.ndarray, subset: Iterable[int]) -> float:
    """Total probability the distribution puts on ``subset``."""
    p = dist.probs if isinstance(dist, FiniteDistribution) else np.asarray(dist)
    idx = sorted(set(int(i) for i in subset))
    if idx and (idx[0] < 0 or idx[-1] >= p.size):
        raise IndexOutOfSpace(f"subset {idx} not inside space of size {p.size}")
    return float(p[idx].sum()) if idx else 0.0


@dataclass(frozen=True, eq=False)
class ModelGroup:
    """``n`` model distributions over one space with declared safe count ``s``.

    ``truth_labels`` (True = safe) is simulation metadata. The protocol code
    reads only ``probs`` and ``s``.
    """

    probs: np.ndarray
    s: int
    space: OutputSpace
    truth_labels: tuple[bool, ...] | None = None
    _validated: bool = field(default=False, repr=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or p.shape[0] < 1:
            raise ValueError(f"expected an (n, size) matrix, got shape {p.shape}")
        if p.shape[1] != self.space.size:
            raise ValueError(f"rows have {p.shape[1]} entries, space has {self.space.size}")
        if not self._validated:
            for row in p:
                validate(row)
        if not 1 <= self.s <= p.shape[0]:
            raise ValueError(f"s must lie in [1, {p.shape[0]}], got {self.s}")
        if self.truth_labels is not None:
            labels = tuple(bool(x) for x in self.truth_labels)
            if len(labels) != p.shape[0]:
                raise ValueError("one truth label per model required")
            object.__setattr__(self, "truth_labels", labels)
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_models(cls, models: Sequence[FiniteDistribution | Sequence[float]], s: int,
                    space: OutputSpace | None = None,
                    truth_labels: Sequence[bool] | None = None) -> "ModelGroup":
        rows = [m.probs if isinstance(m, FiniteDistribution) else np.asarray(m, float) for m in models]
        matrix = np.vstack(rows)
        space = space or OutputSpace(matrix.shape[1])
        return cls(matrix, s, space, None if truth_labels is None else tuple(truth_labels))

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def models(self) -> list[FiniteDistribution]:
        return [FiniteDistribution(row) for row in self.probs]

    def subset(self, indices: Sequence[int], s: int | None = None) -> "ModelGroup":
        """Group restricted to ``indices`` (in the given order)."""
        idx = list(indices)
        labels = None if self.truth_labels is None else tuple(self.truth_labels[i] for i in idx)
        return ModelGroup(self.probs[idx], self.s if s is None else s, self.space, labels,
                          _validated=True)

    def with_labels(self, labels: Sequence[bool]) -> "ModelGroup":
        return ModelGroup(self.probs, self.s, self.space, tuple(labels), _validated=True)

    # cached per-response statistics; the group is immutable

    @cached_property
    def sorted_columns(self) -> np.ndarray:
        out = np.sort(self.probs, axis=0)
        out.flags.writeable = False
        return out

    @cached_property
    def low_sums(self) -> np.ndarray:
        """Sum of the ``s`` smallest probabilities at each response."""
        return self.sorted_columns[: self.s].sum(axis=0)

    @cached_property
    def high_sums(self) -> np.ndarray:
        """Sum of the ``n - s`` largest probabilities at each response."""
        return self.sorted_columns[self.s:].sum(axis=0)

    @cached_property
    def mixture(self) -> np.ndarray:
        return self.probs.mean(axis=0)

    @cached_property
    def sigmas(self) -> np.ndarray:
        low_mean = self.low_sums / self.s
        with np.errstate(divide="ignore", invalid="ignore"):
            sig = np.where(self.mixture > 0, low_mean / self.mixture, np.nan)
        cols = self.sorted_columns
        sig = np.where((cols[0] == cols[-1]) & (self.mixture > 0), 1.0, sig)
        # the mean of the s smallest never exceeds the mean of all n
        return np.clip(sig, 0.0, 1.0)

    @cached_property
    def cdfs(self) -> np.ndarray:
        c = np.cumsum(self.probs, axis=1)
        return c / c[:, -1:]


def mixture_draw(group: ModelGroup, rng: np.random.Generator) -> tuple[int, int]:
    """Draw ``(y, origin)`` from the uniform mixture of the group's models.

    One integer variate picks the model, one uniform variate inverts its CDF.
    """
    origin = int(rng.integers(group.n))
    u = rng.random()
    y = int(np.searchsorted(group.cdfs[origin], u, side="right"))
    return y, origin


def order_stats_at(group: ModelGroup, y: int) -> np.ndarray:
    group.space.check_index(y)
    return group.sorted_columns[:, y]


def sigma(group: ModelGroup, y: int) -> tuple[float, np.ndarray]:
    """Acceptance ratio at ``y`` together with the sorted probabilities there."""
    group.space.check_index(y)
    if group.mixture[y] <= 0:
        raise ZeroMixtureMass(f"no model assigns probability to response {y}")
    return float(group.sigmas[y]), group.sorted_columns[:, y]


def overlap_z(group: ModelGroup) -> float:
    """Total mass of the mean-of-s-smallest statistic over all responses."""
    return float(min(1.0, group.low_sums.sum() / group.s))


def accept_distribution(group: ModelGroup) -> np.ndarray:
    """Distribution of a round-1 accepted response, ``(1/Z)(1/s) sum_{i<=s} p_(i)``."""
    z = group.low_sums.sum()
    if z <= 0:
        raise ZeroMixtureMass("overlap is zero; nothing can be accepted")
    return group.low_sums / z
