"""Two-level-system noise ensembles coupled to superconducting qubits."""

__version__ = "0.1.0"
