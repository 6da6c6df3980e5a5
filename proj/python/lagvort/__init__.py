"""Vortex-blob flows of 2D Euler on the disk and the plane."""

from ._core import (
    BlowUpError,
    ConfigError,
    DomainError,
    Error,
    FlowHistory,
    HistoryError,
    QuadratureError,
    ResolutionError,
    SingularInputError,
    calibrate_kernel,
    disk_kernel,
    eval_vorticity,
    forward_flow,
    lp_distance,
    modulus_phi,
    plane_kernel,
    regularized_kernel,
    run_experiment,
    set_thread_count,
    thread_count,
    velocity,
)


def disk_patch(center, radius, amplitude=1.0):
    """JSON-ready spec of a uniform disk patch."""
    return {"kind": "disk_patch", "center": list(center), "radius": radius, "amplitude": amplitude}


__all__ = [
    "BlowUpError",
    "ConfigError",
    "DomainError",
    "Error",
    "FlowHistory",
    "HistoryError",
    "QuadratureError",
    "ResolutionError",
    "SingularInputError",
    "calibrate_kernel",
    "disk_kernel",
    "disk_patch",
    "eval_vorticity",
    "forward_flow",
    "lp_distance",
    "modulus_phi",
    "plane_kernel",
    "regularized_kernel",
    "run_experiment",
    "set_thread_count",
    "thread_count",
    "velocity",
]
