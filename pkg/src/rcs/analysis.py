"""Risk-bound diagnostics, the collusion lever and an exact enumeration oracle."""
from __future__ import annotations

import itertools
import math
from collections import namedtuple
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .dist import ModelGroup, overlap_z, sigma
from .errors import TooLarge
from .protocols import Phase, run_rcs, trace_choice

MAX_ORACLE_SIZE = 8
MAX_ORACLE_ROUNDS = 8


@dataclass(frozen=True)
class RiskReport:
    Z: float
    pr_trace: float
    mu_U: float
    mu_U_order: float
    rho_U_hat: float
    q_U_hat: float
    bound: float
    n_bound: float
    trials: int
    trace_trials: int

    def as_dict(self) -> dict:
        return asdict(self)


def delta_sigma(group: ModelGroup, y_t: int, y_v: int) -> tuple[float, float]:
    """``sigma(y_t) - sigma(y_v)`` and the ratio whose side of 1 fixes its sign.

    The ratio is ``(L_t H_v) / (L_v H_t)`` with ``L`` the sum of the ``s``
    smallest and ``H`` the sum of the ``n - s`` largest probabilities at a
    response. A zero denominator is reported as ``inf``.
    """
    sig_t, _ = sigma(group, y_t)
    sig_v, _ = sigma(group, y_v)
    if y_t == y_v:
        return 0.0, 1.0
    num = group.low_sums[y_t] * group.high_sums[y_v]
    den = group.low_sums[y_v] * group.high_sums[y_t]
    dtv = math.inf if den == 0 else float(num / den)
    return sig_t - sig_v, dtv


def mu_unsafe(group: ModelGroup) -> float:
    """Mean unsafe mass over the truly safe models."""
    if group.truth_labels is None:
        raise ValueError("mu(U) needs truth labels")
    safe = [i for i, ok in enumerate(group.truth_labels) if ok]
    if not safe:
        return math.nan
    return float(group.probs[safe][:, group.space.unsafe_mask].sum(axis=1).mean())


def mu_unsafe_order(group: ModelGroup) -> float:
    """``(1/s) * sum of the s smallest per-model unsafe masses``."""
    masses = np.sort(group.probs[:, group.space.unsafe_mask].sum(axis=1))
    return float(masses[: group.s].sum() / group.s)


def risk_bound_report(group: ModelGroup, R: int, trials: int, rng: np.random.Generator) -> RiskReport:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    z = overlap_z(group)
    pr_trace = (1.0 - z) ** R
    mu = mu_unsafe(group)
    unsafe_hits = trace_hits = traced = 0
    for _ in range(trials):
        out = run_rcs(group, R, rng)
        bad = out.y in group.space.unsafe
        unsafe_hits += bad
        if out.phase is Phase.TRACE:
            traced += 1
            trace_hits += bad
    rho = trace_hits / traced if traced else math.nan
    # with no trace observed, rho is bounded by 1
    rho_for_bound = 1.0 if math.isnan(rho) else rho
    return RiskReport(
        Z=z,
        pr_trace=pr_trace,
        mu_U=mu,
        mu_U_order=mu_unsafe_order(group),
        rho_U_hat=rho,
        q_U_hat=unsafe_hits / trials,
        bound=R * mu + pr_trace * rho_for_bound,
        n_bound=group.n * mu + pr_trace,
        trials=trials,
        trace_trials=traced,
    )


_Candidate = namedtuple("_Candidate", "y sigma_val round")


def _exact_rows(group: ModelGroup) -> list[list[Fraction]]:
    """Rows as rationals, rescaled so each sums to exactly 1.

    Float rows are normalised only to rounding error; without the rescale the
    mixture mass differs from 1 by a few ulps and ``1 - Z`` stops being the
    exact rejection probability.
    """
    rows = []
    for row in group.probs:
        vals = [Fraction(float(v)) for v in row]
        total = sum(vals, Fraction(0))
        rows.append([v / total for v in vals])
    return rows


def _exact_columns(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    return [sorted(col) for col in zip(*rows)]


def exhaustive_q(group: ModelGroup, R: int, max_size: int = MAX_ORACLE_SIZE,
                 max_rounds: int = MAX_ORACLE_ROUNDS) -> Fraction:
    """Exact probability that RCS delivers an unsafe response.

    Works in rational arithmetic on the exact binary values of the inputs,
    rescaled per row to sum to one. The accept path is summed in closed form per round, the trace path by
    enumerating every sequence of ``R`` rejected responses.
    """
    size = group.space.size
    if size > max_size or R > max_rounds:
        raise TooLarge(f"enumeration limited to |Y| <= {max_size}, R <= {max_rounds}; "
                       f"got |Y| = {size}, R = {R}")
    if R < 1:
        raise ValueError("R must be at least 1")
    n, s = group.n, group.s
    cols = _exact_columns(_exact_rows(group))
    low = [sum(c[:s], Fraction(0)) for c in cols]
    high = [sum(c[s:], Fraction(0)) for c in cols]
    total = [sum(c, Fraction(0)) for c in cols]
    accept_w = [lo / s for lo in low]
    reject_w = [t / n - a for t, a in zip(total, accept_w)]
    sig = [(lo / s) / (t / n) if t > 0 else Fraction(0) for lo, t in zip(low, total)]
    unsafe = group.space.unsafe

    z = sum(accept_w, Fraction(0))
    rej = 1 - z
    accept_unsafe = sum((accept_w[y] for y in unsafe), Fraction(0))
    q = accept_unsafe * sum((rej ** r for r in range(R)), Fraction(0))

    support = [y for y in range(size) if reject_w[y] > 0]
    for seq in itertools.product(support, repeat=R):
        entries = [_Candidate(y, sig[y], r + 1) for r, y in enumerate(seq)]
        win = trace_choice(entries, s, R, lambda e: high[e.y])
        if win.y in unsafe:
            weight = Fraction(1)
            for y in seq:
                weight *= reject_w[y]
            q += weight
    return q


def bound_rhs(group: ModelGroup, R: int) -> Fraction:
    """``R * mu(U) + (1 - Z)^R`` in exact arithmetic, with the order-statistic ``mu``."""
    rows = _exact_rows(group)
    unsafe = group.space.unsafe
    masses = sorted(sum((row[y] for y in unsafe), Fraction(0)) for row in rows)
    mu = sum(masses[: group.s], Fraction(0)) / group.s
    cols = _exact_columns(rows)
    z = sum((sum(c[: group.s], Fraction(0)) for c in cols), Fraction(0)) / group.s
    return R * mu + (1 - z) ** R
