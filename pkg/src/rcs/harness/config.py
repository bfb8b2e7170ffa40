"""Experiment grid definition, presets and YAML config loading."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..adversary import Regime, SafeModelSpec, refusal_bases
from ..dist import OutputSpace
from ..protocols import LatencyModel

ALL_PROTOCOLS = ("CS", "RCS", "RCS_COIN", "FRCS")
ALL_REGIMES = (Regime.GENERAL, Regime.HALF_RESILIENCE, Regime.COLLUSION)


@dataclass(frozen=True)
class ExperimentGrid:
    lambdas: tuple[int, ...] = (2, 4, 8, 16, 32)
    n_values: tuple[int, ...] = (5, 9, 17, 33, 65, 129)
    # the f = ceil(n/2) experiments use even group sizes
    half_n_values: tuple[int, ...] = (34, 66, 130)
    regimes: tuple[Regime, ...] = ALL_REGIMES
    trials_per_cell: int = 8000
    base_seed: int = 0
    protocols: tuple[str, ...] = ALL_PROTOCOLS
    # adversary knobs
    jitter: float = 0.05
    collusion_strength: float = 0.9
    psi_floor: float = 0.6
    general_shift: tuple[float, float] = (0.5, 1.0)
    # n = k * R + b when n_values is empty
    k: int = 4
    b: int = 1
    # synthetic output space and safe seeds
    space_size: int = 64
    n_unsafe: int = 16
    n_bases: int = 3
    consensus: tuple[float, float] = (0.96, 0.99)
    base_unsafe_mass: float = 1e-4
    distributions: str | None = None
    # feedback and diagnostics
    feedback_delay: int = 4
    risk_trials: int = 1000
    per_round_cost: float = 1.0
    trace_coeff: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "regimes", tuple(Regime(r) for r in self.regimes))
        for name in ("lambdas", "n_values", "half_n_values", "protocols"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "general_shift", tuple(self.general_shift))
        object.__setattr__(self, "consensus", tuple(self.consensus))
        for lam in self.lambdas:
            if lam < 1 or lam & (lam - 1):
                raise ValueError(f"lambda values must be powers of two, got {lam}")
        unknown = set(self.protocols) - set(ALL_PROTOCOLS)
        if unknown:
            raise ValueError(f"unknown protocols {sorted(unknown)}")
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be positive")
        if not 0 <= self.n_unsafe < self.space_size:
            raise ValueError("need at least one safe response")

    @property
    def latency(self) -> LatencyModel:
        return LatencyModel(self.per_round_cost, self.trace_coeff)

    def group_sizes(self, regime: Regime, lam: int) -> tuple[int, ...]:
        values = self.half_n_values if regime is Regime.HALF_RESILIENCE else self.n_values
        if values:
            return tuple(values)
        n = self.k * (lam + 1) + self.b
        return (n + 1,) if regime is Regime.HALF_RESILIENCE and n % 2 else (n,)

    def cells(self):
        """Yield ``(regime, lambda, n)`` in the fixed reporting order."""
        for regime in self.regimes:
            for lam in self.lambdas:
                for n in self.group_sizes(regime, lam):
                    yield regime, lam, n

    def replace(self, **changes) -> "ExperimentGrid":
        return dataclasses.replace(self, **changes)


PRESETS = {
    "paper": {"trials_per_cell": 8000, "risk_trials": 2000},
    "ci": {"trials_per_cell": 1000, "risk_trials": 300},
}


def preset(name: str, **overrides) -> ExperimentGrid:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentGrid(**{**PRESETS[name], **overrides})


def load_config(path: str | Path, base: ExperimentGrid | None = None) -> ExperimentGrid:
    """Read a YAML mapping of ExperimentGrid fields (plus an optional ``preset``)."""
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    known = {f.name for f in dataclasses.fields(ExperimentGrid)}
    name = data.pop("preset", None)
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    if name is not None:
        grid = preset(name)
    else:
        grid = base or ExperimentGrid()
    if data.get("distributions"):
        data["distributions"] = str((Path(path).parent / data["distributions"]).resolve())
    return grid.replace(**data)


def default_space(grid: ExperimentGrid) -> OutputSpace:
    size = grid.space_size
    return OutputSpace(size, frozenset(range(size - grid.n_unsafe, size)))


def build_spec(grid: ExperimentGrid) -> SafeModelSpec:
    """Safe-model spec from the ingested file if given, else synthetic refusal bases."""
    if grid.distributions:
        from .ingest import ingest_distributions

        space, dists = ingest_distributions(grid.distributions)
        return SafeModelSpec(tuple(dists), space, grid.psi_floor, grid.jitter)
    space = default_space(grid)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(grid.base_seed, spawn_key=(0xB45E,))))
    bases = refusal_bases(space, grid.n_bases, rng, grid.consensus, grid.base_unsafe_mass)
    return SafeModelSpec(bases, space, grid.psi_floor, grid.jitter)


def s_for(n: int) -> int:
    return math.ceil((n + 1) / 2)
