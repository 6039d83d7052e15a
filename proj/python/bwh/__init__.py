"""Python access to the Bloch wave homogenization core."""

from ._bwh import (
    CellMedium,
    ConfigError,
    NumericalError,
    bands,
    corrector_study,
    critical,
    effective,
    free_medium,
    mathieu_medium,
    medium_from_json,
    perturbation_series,
    run_cli,
    supercell_oracle,
    track_branches,
)

__all__ = [
    "CellMedium",
    "ConfigError",
    "NumericalError",
    "bands",
    "corrector_study",
    "critical",
    "effective",
    "free_medium",
    "mathieu_medium",
    "medium_from_json",
    "perturbation_series",
    "run_cli",
    "supercell_oracle",
    "track_branches",
]
