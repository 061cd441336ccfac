"""Vertical federated learning simulator: multi-head ADMM methods, gradient
baselines, client-level differential privacy and byte-exact communication
ledgers, driven by flat key=value configs."""

from ._core import (
    __version__,
    calibrate_sigma,
    effective_config,
    label_dp_epsilon,
    rdp_epsilon,
    run_experiment,
    run_training,
    update_z,
)

__all__ = [
    "__version__",
    "calibrate_sigma",
    "effective_config",
    "label_dp_epsilon",
    "rdp_epsilon",
    "run_experiment",
    "run_training",
    "update_z",
]
