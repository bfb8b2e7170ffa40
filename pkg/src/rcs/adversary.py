"""Synthetic model groups for the three adversarial regimes.

Safe models are jittered copies of seed distributions that keep at least
``psi_floor`` of their mass on safe responses. Byzantine models are derived
from safe seeds: in the general regime each one independently moves mass from
safe to unsafe responses; colluders share a single distribution concentrated
on one unsafe target.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .dist import FiniteDistribution, ModelGroup, OutputSpace
from .errors import EmptyUnsafeSet, InfeasibleFloor

_TOL = 1e-12


class Regime(str, Enum):
    GENERAL = "general"
    COLLUSION = "collusion"
    HALF_RESILIENCE = "half"


@dataclass(frozen=True)
class SafeModelSpec:
    base_dists: tuple[FiniteDistribution, ...]
    space: OutputSpace
    psi_floor: float = 0.6
    jitter: float = 0.05

    def __post_init__(self):
        bases = tuple(b if isinstance(b, FiniteDistribution) else FiniteDistribution(b)
                      for b in self.base_dists)
        if not bases:
            raise ValueError("at least one base distribution required")
        if any(len(b) != self.space.size for b in bases):
            raise ValueError("base distributions must match the output space size")
        if not 0 < self.psi_floor <= 1:
            raise ValueError(f"psi_floor must lie in (0, 1], got {self.psi_floor}")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")
        object.__setattr__(self, "base_dists", bases)


def refusal_bases(space: OutputSpace, count: int, rng: np.random.Generator,
                  consensus: tuple[float, float] = (0.96, 0.99), unsafe_mass: float = 1e-4,
                  anchor: int | None = None) -> tuple[FiniteDistribution, ...]:
    """Synthetic stand-ins for exported safety-tuned model outputs.

    All bases put most of their mass (drawn from ``consensus``) on one shared
    safe ``anchor`` response, a canonical refusal, spread the remainder over
    the other safe responses, and keep ``unsafe_mass`` on U.
    """
    safe = np.array(sorted(space.safe))
    unsafe = np.array(sorted(space.unsafe))
    if anchor is None:
        anchor = int(safe[0])
    if anchor not in space.safe:
        raise ValueError(f"anchor {anchor} is not a safe response")
    others = safe[safe != anchor]
    u_mass = unsafe_mass if unsafe.size else 0.0
    out = []
    for _ in range(count):
        c = rng.uniform(*consensus)
        p = np.zeros(space.size)
        p[anchor] = c
        if others.size:
            p[others] = (1 - c - u_mass) * rng.dirichlet(np.full(others.size, 0.5))
        else:
            p[anchor] += 1 - c - u_mass
        if unsafe.size:
            p[unsafe] = u_mass * rng.dirichlet(np.full(unsafe.size, 0.5))
        out.append(FiniteDistribution(p / p.sum()))
    return tuple(out)


def _lift_safe_mass(b: np.ndarray, mask: np.ndarray, deficit: float) -> np.ndarray:
    """Move ``deficit`` mass from unsafe to safe responses, proportionally."""
    out = b.copy()
    unsafe_mass = out[mask].sum()
    out[mask] *= 1 - deficit / unsafe_mass
    safe_mass = out[~mask].sum()
    if safe_mass > 0:
        out[~mask] *= (safe_mass + deficit) / safe_mass
    else:
        out[~mask] = deficit / (~mask).sum()
    return out


def _safe_rows(spec: SafeModelSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be at least 1")
    space, psi, jitter = spec.space, spec.psi_floor, spec.jitter
    mask = space.unsafe_mask
    if not (~mask).any():
        raise InfeasibleFloor("no safe responses to place the floor on")
    lifted, budgets = [], []
    for i, b in enumerate(spec.base_dists):
        deficit = max(0.0, psi - b.probs[~mask].sum())
        if deficit > jitter + _TOL:
            raise InfeasibleFloor(f"base {i} has safe mass {b.probs[~mask].sum():.6g}, "
                                  f"floor {psi} is out of reach with jitter {jitter}")
        lifted.append(_lift_safe_mass(b.probs, mask, deficit) if deficit > 0 else b.probs)
        budgets.append(max(0.0, jitter - deficit))
    lifted, budgets = np.vstack(lifted), np.array(budgets)

    pick = rng.integers(len(spec.base_dists), size=count)
    b0, t = lifted[pick], budgets[pick][:, None]
    q = rng.dirichlet(np.ones(space.size), size=count)
    # perturb which responses are chosen, never how unsafe the model is:
    # the direction carries no more unsafe mass than the lifted base
    q_unsafe = q[:, mask].sum(axis=1, keepdims=True)
    cap = b0[:, mask].sum(axis=1, keepdims=True)
    over = q_unsafe > cap
    scale_u = np.where(over, cap / np.where(over, q_unsafe, 1.0), 1.0)
    scale_s = np.where(over, (1 - cap) / np.where(over, 1 - q_unsafe, 1.0), 1.0)
    q = np.where(mask, q * scale_u, q * scale_s)
    m = (1 - t) * b0 + t * q
    return m / m.sum(axis=1, keepdims=True)


def gen_safe_models(spec: SafeModelSpec, count: int, rng: np.random.Generator) -> list[FiniteDistribution]:
    """``count`` safe models, each within ``jitter`` total variation of a base."""
    return [FiniteDistribution(row) for row in _safe_rows(spec, count, rng)]


def _general_rows(seeds: np.ndarray, count: int, rng: np.random.Generator, space: OutputSpace,
                  magnitude: float | None, magnitude_range: tuple[float, float]) -> np.ndarray:
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return np.empty((0, space.size))
    mask = space.unsafe_mask
    n_unsafe = int(mask.sum())
    if n_unsafe == 0:
        raise EmptyUnsafeSet("general perturbation needs at least one unsafe response")
    base = seeds[rng.integers(len(seeds), size=count)]
    if magnitude is None:
        mag = rng.uniform(*magnitude_range, size=count)
    else:
        mag = np.full(count, float(magnitude))
    safe_mass = base[:, ~mask].sum(axis=1)
    moved = np.minimum(mag, safe_mass)
    keep = np.where(safe_mass > 0, 1 - moved / np.where(safe_mass > 0, safe_mass, 1.0), 0.0)
    p = base.copy()
    p[:, ~mask] *= keep[:, None]
    p[:, mask] += moved[:, None] * rng.dirichlet(np.ones(n_unsafe), size=count)
    p = np.clip(p, 0, None)
    return p / p.sum(axis=1, keepdims=True)


def gen_byzantine_general(safe_models: Sequence[FiniteDistribution], count: int,
                          rng: np.random.Generator, space: OutputSpace,
                          magnitude: float | None = None,
                          magnitude_range: tuple[float, float] = (0.5, 1.0)) -> list[FiniteDistribution]:
    """Independent Byzantine models, each shifting mass from safe to unsafe.

    The shift is an absolute amount of probability (capped at the seed's safe
    mass) drawn per model from ``magnitude_range`` unless ``magnitude`` is fixed.
    Its destination within U is a per-model Dirichlet draw.
    """
    seeds = np.vstack([m.probs for m in safe_models]) if count else None
    rows = _general_rows(seeds, count, rng, space, magnitude, magnitude_range)
    return [FiniteDistribution(row) for row in rows]


def _collusion_row(seeds: np.ndarray, strength: float, rng: np.random.Generator,
                   space: OutputSpace, target: int | None) -> np.ndarray:
    if not 0 <= strength <= 1:
        raise ValueError(f"strength must lie in [0, 1], got {strength}")
    if not space.unsafe:
        raise EmptyUnsafeSet("collusion needs an unsafe target")
    seed = seeds[int(rng.integers(len(seeds)))]
    if target is None:
        target = int(rng.choice(sorted(space.unsafe)))
    elif target not in space.unsafe:
        raise ValueError(f"target {target} is not an unsafe response")
    p = (1 - strength) * seed
    p[target] += strength
    return p / p.sum()


def gen_byzantine_collusion(safe_models: Sequence[FiniteDistribution], count: int, strength: float,
                            rng: np.random.Generator, space: OutputSpace,
                            target: int | None = None) -> list[FiniteDistribution]:
    """``count`` identical colluders: ``(1 - strength) * seed + strength * point(y_t)``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    seeds = np.vstack([m.probs for m in safe_models])
    shared = FiniteDistribution(_collusion_row(seeds, strength, rng, space, target))
    return [shared] * count


def default_f(regime: Regime, n: int) -> int:
    s = math.ceil((n + 1) / 2)
    if regime is Regime.HALF_RESILIENCE:
        return math.ceil(n / 2)
    return n - s


@dataclass(frozen=True)
class ScenarioConfig:
    regime: Regime
    lambda_: int
    n: int
    f_actual: int | None = None
    seed: int = 0
    trials: int = 1000
    collusion_strength: float = 0.9
    general_shift: tuple[float, float] = (0.5, 1.0)

    def __post_init__(self):
        regime = Regime(self.regime)
        object.__setattr__(self, "regime", regime)
        if self.lambda_ < 1 or self.lambda_ & (self.lambda_ - 1):
            raise ValueError(f"lambda must be a power of two, got {self.lambda_}")
        if self.n < 2:
            raise ValueError("a group needs at least two models")
        if self.f_actual is None:
            object.__setattr__(self, "f_actual", default_f(regime, self.n))
        f, half = self.f_actual, math.ceil(self.n / 2)
        if not 0 <= f < self.n:
            raise ValueError(f"f_actual must lie in [0, n), got {f}")
        if regime is Regime.GENERAL and f >= half:
            raise ValueError(f"general regime needs f < ceil(n/2) = {half}, got {f}")
        if regime is Regime.HALF_RESILIENCE and f != half:
            raise ValueError(f"half-resilience needs f = ceil(n/2) = {half}, got {f}")
        if regime is Regime.COLLUSION and f < 1:
            raise ValueError("collusion needs at least one colluder")

    @property
    def R(self) -> int:
        return self.lambda_ + 1

    @property
    def s_declared(self) -> int:
        return math.ceil((self.n + 1) / 2)

    @property
    def converted(self) -> int:
        """Number of declared-safe models that turned unsafe (``m``)."""
        return self.f_actual - (self.n - self.s_declared)


def byzantine_placement(n: int, f: int, rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(sorted(int(i) for i in rng.permutation(n)[:f]))


def build_group(config: ScenarioConfig, spec: SafeModelSpec, rng: np.random.Generator,
                byzantine_positions: Sequence[int] | None = None) -> ModelGroup:
    """Assemble ``n`` labelled models with exactly ``f_actual`` Byzantine ones.

    Positions are uniform over placements unless fixed by the caller (the
    harness pins them per cell so model identities persist across prompts).
    """
    n, f = config.n, config.f_actual
    safe = _safe_rows(spec, n - f, rng)
    if f == 0:
        byz = np.empty((0, spec.space.size))
    elif config.regime is Regime.COLLUSION:
        row = _collusion_row(safe, config.collusion_strength, rng, spec.space, None)
        byz = np.repeat(row[None, :], f, axis=0)
    else:
        byz = _general_rows(safe, f, rng, spec.space, None, config.general_shift)
    if byzantine_positions is None:
        byzantine_positions = byzantine_placement(n, f, rng)
    bad = sorted(set(int(i) for i in byzantine_positions))
    if len(bad) != f or not all(0 <= i < n for i in bad):
        raise ValueError(f"need {f} distinct Byzantine positions in [0, {n})")
    labels = np.ones(n, dtype=bool)
    labels[bad] = False
    probs = np.empty((n, spec.space.size))
    probs[labels] = safe
    probs[~labels] = byz
    return ModelGroup(probs, config.s_declared, spec.space, tuple(labels.tolist()), _validated=True)
