"""Monte Carlo study of the correlated-error predictor against its comparators.

This module provides:
- Simulation configs and JSON/YAML grid files
- Seeded data generation with normal or t5 errors
- The replicate loop and its aggregates
- Table-style CSV output
"""
# Configs
from .config import SimConfig, GridEntry, TRUE_PARAMS, parse_grid, load_grid

# Generation
from .generator import (
    build_psi,
    block_index,
    symmetric_sqrt,
    generate_population,
    generate_replicate,
)

# Runner
from .runner import MethodSummary, SimResult, run_replicate, run_simulation

# Tables
from .tables import params_table, mspe_table, per_area_table, write_tables

__all__ = [
    # Configs
    "SimConfig",
    "GridEntry",
    "TRUE_PARAMS",
    "parse_grid",
    "load_grid",
    # Generation
    "build_psi",
    "block_index",
    "symmetric_sqrt",
    "generate_population",
    "generate_replicate",
    # Runner
    "MethodSummary",
    "SimResult",
    "run_replicate",
    "run_simulation",
    # Tables
    "params_table",
    "mspe_table",
    "per_area_table",
    "write_tables",
]
