"""Result persistence and per-regime summary tables."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Sequence

from ..adversary import Regime
from ..analysis import RiskReport
from ..errors import EmptyResults
from .runner import CellResult

CSV_HEADER = (
    "protocol", "regime", "lambda", "R", "n", "s", "f_actual", "trials",
    "safe_rate", "sr_over_all_trials", "abstention_rate", "mean_latency_units",
    "feedback_accuracy", "Z", "pr_trace", "mu_U", "rho_U_hat", "q_U_hat", "bound",
)

FEEDBACK_HEADER = ("protocol", "regime", "lambda", "n", "timestamp", "task", "y", "provenance",
                   "phi_max", "phi_min", "self_entangled")

METRICS = ("safe_rate", "sr_over_all_trials", "abstention_rate", "mean_latency_units", "feedback_accuracy")
REGIME_ORDER = (Regime.GENERAL, Regime.HALF_RESILIENCE, Regime.COLLUSION)
REGIME_TITLES = {Regime.GENERAL: "f < ceil(n/2)", Regime.HALF_RESILIENCE: "f = ceil(n/2)",
                 Regime.COLLUSION: "Collusion"}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def csv_row(res: CellResult) -> list[str]:
    risk = res.risk
    rvals = ([risk.Z, risk.pr_trace, risk.mu_U, risk.rho_U_hat, risk.q_U_hat, risk.bound]
             if risk else [None] * 6)
    vals = [res.protocol, Regime(res.regime).value, res.lambda_, res.R, res.n, res.s, res.f_actual,
            res.trials, res.safe_rate, res.sr_over_all_trials, res.abstention_rate,
            res.mean_latency_units, res.feedback_accuracy, *rvals]
    return [_fmt(v) for v in vals]


def results_csv(results: Iterable[CellResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for res in results:
        writer.writerow(csv_row(res))
    return buf.getvalue()


def _opt_float(text: str) -> float | None:
    return None if text == "" else float(text)


def read_results_csv(path: str | Path) -> list[CellResult]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: header does not match the results schema")
        out = []
        for row in reader:
            f = {k: _opt_float(row[k]) for k in CSV_HEADER[8:]}
            risk = None
            if f["Z"] is not None:
                risk = RiskReport(Z=f["Z"], pr_trace=f["pr_trace"], mu_U=f["mu_U"], mu_U_order=math.nan,
                                  rho_U_hat=f["rho_U_hat"], q_U_hat=f["q_U_hat"], bound=f["bound"],
                                  n_bound=math.nan, trials=0, trace_trials=0)
            out.append(CellResult(
                protocol=row["protocol"], regime=Regime(row["regime"]), lambda_=int(row["lambda"]),
                R=int(row["R"]), n=int(row["n"]), s=int(row["s"]), f_actual=int(row["f_actual"]),
                trials=int(row["trials"]), safe_rate=f["safe_rate"],
                sr_over_all_trials=f["sr_over_all_trials"], abstention_rate=f["abstention_rate"],
                mean_latency_units=f["mean_latency_units"], feedback_accuracy=f["feedback_accuracy"],
                risk=risk,
            ))
        return out


def _mean(values: Sequence[float | None]) -> float | None:
    vals = [v for v in values if v is not None and not math.isnan(v)]
    return sum(vals) / len(vals) if vals else None


def aggregate_table(results: Sequence[CellResult]) -> list[dict]:
    """Per (protocol, regime) means over cells, plus an AVG row per protocol.

    AVG is the mean of the regime means, so each regime weighs the same
    regardless of how many cells it has.
    """
    ok = [r for r in results if r.failure is None]
    if not ok:
        raise EmptyResults("no successful cells to aggregate")
    protocols = list(dict.fromkeys(r.protocol for r in ok))
    rows = []
    for proto in protocols:
        regime_rows = []
        for regime in REGIME_ORDER:
            cells = [r for r in ok if r.protocol == proto and Regime(r.regime) is regime]
            if not cells:
                continue
            row = {"protocol": proto, "regime": regime.value, "cells": len(cells)}
            row.update({m: _mean([getattr(c, m) for c in cells]) for m in METRICS})
            regime_rows.append(row)
        avg = {"protocol": proto, "regime": "AVG", "cells": sum(r["cells"] for r in regime_rows)}
        avg.update({m: _mean([r[m] for r in regime_rows]) for m in METRICS})
        rows.extend(regime_rows)
        rows.append(avg)
    return rows


def format_table(rows: Sequence[dict]) -> str:
    """Render aggregated rows as a text table: one line per metric and protocol."""
    columns = [r.value for r in REGIME_ORDER] + ["AVG"]
    titles = [REGIME_TITLES[r] for r in REGIME_ORDER] + ["AVG"]
    labels = {"safe_rate": "Safe Rate", "sr_over_all_trials": "Safe Rate (all trials)",
              "abstention_rate": "Abstention Rate", "mean_latency_units": "Latency",
              "feedback_accuracy": "Feedback Accuracy"}
    pct = {"safe_rate", "sr_over_all_trials", "abstention_rate", "feedback_accuracy"}
    by_key = {(r["protocol"], r["regime"]): r for r in rows}
    lines = []
    for proto in dict.fromkeys(r["protocol"] for r in rows):
        lines.append(f"{proto}")
        lines.append(f"  {'metric':<24}" + "".join(f"{t:>16}" for t in titles))
        for metric, label in labels.items():
            cells = []
            for col in columns:
                v = by_key.get((proto, col), {}).get(metric)
                cells.append("-" if v is None else (f"{100 * v:.2f}" if metric in pct else f"{v:.2f}"))
            if all(c == "-" for c in cells):
                continue
            lines.append(f"  {label:<24}" + "".join(f"{c:>16}" for c in cells))
    return "\n".join(lines)


PLOT_METRICS = {"sr": "safe_rate", "sr_all": "sr_over_all_trials", "ar": "abstention_rate",
                "latency": "mean_latency_units", "accuracy": "feedback_accuracy"}


def emit_results(results: Sequence[CellResult], fmt: str, out: str | Path) -> list[Path]:
    """Write results under directory ``out``; return the files written.

    ``csv``: ``results.csv`` with the fixed header, plus ``feedback_log.csv``
    when F-RCS ran. ``plotdata``: ``plotdata/<regime>/n<n>/<metric>/<protocol>.csv``
    with ``lambda,value`` rows in ascending lambda.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "csv":
        path = out / "results.csv"
        path.write_text(results_csv(results), encoding="utf-8")
        written.append(path)
        logged = [r for r in results if r.feedback_registry is not None]
        if logged:
            path = out / "feedback_log.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(FEEDBACK_HEADER)
                for res in logged:
                    for rec in res.feedback_registry.to_rows():
                        writer.writerow([res.protocol, Regime(res.regime).value, res.lambda_, res.n]
                                        + [_fmt(rec[k]) for k in FEEDBACK_HEADER[4:]])
            written.append(path)
    elif fmt == "plotdata":
        series: dict[tuple, list[tuple[int, float | None]]] = {}
        for res in results:
            if res.failure is not None:
                continue
            for short, attr in PLOT_METRICS.items():
                key = (Regime(res.regime).value, res.n, short, res.protocol)
                series.setdefault(key, []).append((res.lambda_, getattr(res, attr)))
        for (regime, n, metric, proto), points in sorted(series.items()):
            if all(v is None for _, v in points):
                continue
            path = out / "plotdata" / regime / f"n{n}" / metric / f"{proto}.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            lines = ["lambda,value"] + [f"{lam},{_fmt(v)}" for lam, v in sorted(points)]
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)
    else:
        raise ValueError(f"unknown format {fmt!r}; use csv or plotdata")
    return written
