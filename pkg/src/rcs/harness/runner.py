"""Grid execution: per-trial groups, protocol runs and per-cell metrics.

Seeding: every random stream is a Philox generator keyed by
``(base_seed, regime, lambda, n, trial, slot)`` through ``SeedSequence``
spawn keys, so results do not depend on execution order. Slot 0 builds the
trial's model group; slot 1 drives the protocol and is shared by every
protocol in the cell, which therefore face the same draws on the same group.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..adversary import Regime, SafeModelSpec, ScenarioConfig, build_group, byzantine_placement
from ..analysis import RiskReport, risk_bound_report
from ..dist import overlap_z
from ..errors import NoExclusions, RCSError
from ..feedback import ExclusionRegistry, FeedbackSession, feedback_accuracy
from ..protocols import PROTOCOLS
from .config import ExperimentGrid, build_spec

log = logging.getLogger(__name__)

REGIME_CODES = {Regime.GENERAL: 0, Regime.COLLUSION: 1, Regime.HALF_RESILIENCE: 2}
GROUP_SLOT, PROTOCOL_SLOT, PLACEMENT_SLOT, RISK_SLOT = 0, 1, 2, 3


class ZeroOverlapWarning(UserWarning):
    """A generated group had Z = 0, outside the regime the risk bound assumes."""


def stream(base_seed: int, regime: Regime, lam: int, n: int, trial: int, slot: int) -> np.random.Generator:
    key = (REGIME_CODES[Regime(regime)], lam, n, trial, slot)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(base_seed, spawn_key=key)))


@dataclass
class CellResult:
    protocol: str
    regime: Regime
    lambda_: int
    R: int
    n: int
    s: int
    f_actual: int
    trials: int
    safe_rate: float = math.nan
    sr_over_all_trials: float = math.nan
    abstention_rate: float = math.nan
    mean_latency_units: float = math.nan
    feedback_accuracy: float | None = None
    risk: RiskReport | None = None
    trace_rate: float = math.nan
    zero_overlap_groups: int = 0
    failure: str | None = None
    feedback_registry: ExclusionRegistry | None = field(default=None, repr=False)

    @property
    def key(self) -> tuple:
        return (self.protocol, self.regime.value, self.lambda_, self.n)


@dataclass
class _Tally:
    delivered: int = 0
    safe: int = 0
    abstained: int = 0
    traced: int = 0
    latency: float = 0.0

    def add(self, outcome, labels) -> None:
        self.latency += outcome.latency_units
        if outcome.abstained:
            self.abstained += 1
            return
        self.delivered += 1
        self.safe += labels[outcome.origin]
        self.traced += outcome.phase.value == "trace"


def run_cell(grid: ExperimentGrid, spec: SafeModelSpec, regime: Regime, lam: int, n: int) -> list[CellResult]:
    cfg = ScenarioConfig(regime, lam, n, seed=grid.base_seed, trials=grid.trials_per_cell,
                         collusion_strength=grid.collusion_strength, general_shift=grid.general_shift)
    R, trials, latency = cfg.R, grid.trials_per_cell, grid.latency
    protocols = list(grid.protocols)

    def blank(proto: str) -> CellResult:
        return CellResult(proto, cfg.regime, lam, R, n, cfg.s_declared, cfg.f_actual, trials)

    seed = grid.base_seed
    try:
        placement = byzantine_placement(n, cfg.f_actual, stream(seed, regime, lam, n, 0, PLACEMENT_SLOT))
        tallies = {p: _Tally() for p in protocols}
        session = None
        if "FRCS" in protocols:
            session = FeedbackSession(f"{cfg.regime.value}/lambda={lam}/n={n}", spec.space, R,
                                      grid.feedback_delay, latency)
        zero_overlap = 0
        group = None
        for t in range(trials):
            group = build_group(cfg, spec, stream(seed, regime, lam, n, t, GROUP_SLOT), placement)
            if overlap_z(group) <= 0:
                zero_overlap += 1
            labels = group.truth_labels
            for proto in protocols:
                rng = stream(seed, regime, lam, n, t, PROTOCOL_SLOT)
                if proto == "FRCS":
                    outcome, _ = session.step(group, rng)
                else:
                    outcome = PROTOCOLS[proto](group, R, rng, latency)
                tallies[proto].add(outcome, labels)

        first = build_group(cfg, spec, stream(seed, regime, lam, n, 0, GROUP_SLOT), placement)
        risk = risk_bound_report(first, R, grid.risk_trials, stream(seed, regime, lam, n, 0, RISK_SLOT))
    except RCSError as exc:
        log.error("cell %s lambda=%d n=%d failed: %s", cfg.regime.value, lam, n, exc)
        return [_failed(blank(p), exc) for p in protocols]

    if zero_overlap:
        warnings.warn(f"{zero_overlap} of {trials} groups in cell {cfg.regime.value}/lambda={lam}/n={n} "
                      "have zero overlap (Z = 0)", ZeroOverlapWarning, stacklevel=2)

    results = []
    for proto in protocols:
        tally = tallies[proto]
        res = blank(proto)
        res.safe_rate = tally.safe / tally.delivered if tally.delivered else math.nan
        res.sr_over_all_trials = tally.safe / trials
        res.abstention_rate = tally.abstained / trials
        res.mean_latency_units = tally.latency / trials
        res.trace_rate = tally.traced / trials
        res.zero_overlap_groups = zero_overlap
        res.risk = risk
        if proto == "FRCS":
            session.drain(group.n)
            try:
                res.feedback_accuracy = feedback_accuracy(session.registry, group)
            except NoExclusions:
                res.feedback_accuracy = None
            res.feedback_registry = session.registry
        results.append(res)
    return results


def _failed(res: CellResult, exc: Exception) -> CellResult:
    res.failure = f"{type(exc).__name__}: {exc}"
    return res


def _run_cell_args(args) -> list[CellResult]:
    return run_cell(*args)


def run_grid(grid: ExperimentGrid, spec: SafeModelSpec | None = None, workers: int = 1) -> list[CellResult]:
    """Run every cell of the grid; rows come back in the fixed cell order.

    With ``workers > 1`` cells run in a process pool. Seeding is per cell and
    trial, so the output is identical to the serial run.
    """
    spec = spec or build_spec(grid)
    jobs = [(grid, spec, regime, lam, n) for regime, lam, n in grid.cells()]
    results: list[CellResult] = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rows in pool.map(_run_cell_args, jobs):
                results.extend(rows)
        return results
    for job in jobs:
        log.info("cell %s lambda=%d n=%d", job[2].value, job[3], job[4])
        results.extend(run_cell(*job))
    return results
