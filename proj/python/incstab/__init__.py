"""Python bindings for the incstab library."""

import json as _json

from ._incstab import (  # noqa: F401
    Abstraction,
    Controller,
    Project,
    block_metric_matrix,
    compose_lyapunov_matrix,
    grid_counts,
    required_gain,
    required_gain_contraction,
    simulate_builtin,
)


def verify(project, which="lyapunov", threads=1):
    """Runs the certificate checks and returns a list of report dicts."""
    return _json.loads(project.verify_json(which, threads))
