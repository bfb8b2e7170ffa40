from .config import ExperimentGrid, PRESETS, build_spec, load_config, preset
from .ingest import ingest_distributions, parse_distributions
from .report import CSV_HEADER, aggregate_table, emit_results, format_table, read_results_csv
from .runner import CellResult, ZeroOverlapWarning, run_cell, run_grid

__all__ = [
    "CSV_HEADER", "CellResult", "ExperimentGrid", "PRESETS", "ZeroOverlapWarning", "aggregate_table",
    "build_spec", "emit_results", "format_table", "ingest_distributions", "load_config",
    "parse_distributions", "preset", "read_results_csv", "run_cell", "run_grid",
]
