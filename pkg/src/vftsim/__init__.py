"""Pauli-frame simulation of stabilizer-test verification on topological cluster states."""

__version__ = "0.1.0"

from .f2core import BinaryMatrix, BitVec, GraphState, MeasurementRecord, PauliError  # noqa: E402

__all__ = ["BinaryMatrix", "BitVec", "GraphState", "MeasurementRecord", "PauliError", "__version__"]
