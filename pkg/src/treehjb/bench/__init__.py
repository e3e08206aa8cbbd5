"""Heat-equation benchmark, error metrics, experiment driver and CLI."""

from .config import ExperimentConfig, load_config, loads_config, validate
from .experiment import RunReport, run_experiment
from .heat import HeatModel, assemble_heat, laplacian_1d
from .metrics import compute_errors, convergence_order

__all__ = [
    "ExperimentConfig", "HeatModel", "RunReport", "assemble_heat", "compute_errors",
    "convergence_order", "laplacian_1d", "load_config", "loads_config", "run_experiment", "validate",
]
