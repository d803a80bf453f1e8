"""Topological amplification in driven-dissipative parametric oscillator arrays."""

__version__ = "0.1.0"

from .model import (
    BlochMatrix,
    DisorderOffsets,
    DoubledMatrix,
    DynamicalMatrix,
    ModelParams,
    bloch_matrix,
    build_doubled_matrix,
    build_dynamical_matrix,
    build_pump_matrix,
    load_config,
    pump_decomposition,
)

__all__ = [
    "BlochMatrix",
    "DisorderOffsets",
    "DoubledMatrix",
    "DynamicalMatrix",
    "ModelParams",
    "bloch_matrix",
    "build_doubled_matrix",
    "build_dynamical_matrix",
    "build_pump_matrix",
    "load_config",
    "pump_decomposition",
]
