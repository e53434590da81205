"""Spin-1/2 evolution operators, multi-spin Hamiltonians, susceptibility and NMR signal synthesis."""

from .core import PhysicalConstants, PolarState, SpinState
from .propagator import (
    EvolutionPair,
    FieldParams,
    general_propagator,
    rest_propagator,
    rf_propagator,
    static_propagator,
)
from .sequence import compile_sequence, format_program, parse_sequence, run_program

__version__ = "0.1.0"

__all__ = [
    "EvolutionPair",
    "FieldParams",
    "PhysicalConstants",
    "PolarState",
    "SpinState",
    "compile_sequence",
    "format_program",
    "general_propagator",
    "parse_sequence",
    "rest_propagator",
    "rf_propagator",
    "run_program",
    "static_propagator",
]
