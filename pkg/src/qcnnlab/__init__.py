"""Exact statevector study of quantum convolutional networks on cluster-state ground states."""
from .circuits import build_arbitrary_ansatz, build_fixed_qcnn, build_guided_ansatz, make_model
from .embeddings import EmbeddingSpec, basis_dump, embed
from .hamiltonian import ClusterParams, build_hamiltonian, ground_state, string_order
from .sim import Gate, PauliString, apply_gate, expectation, sample_expectation

__version__ = "0.1.0"

__all__ = [
    "ClusterParams", "EmbeddingSpec", "Gate", "PauliString", "apply_gate", "basis_dump",
    "build_arbitrary_ansatz", "build_fixed_qcnn", "build_guided_ansatz", "build_hamiltonian",
    "embed", "expectation", "ground_state", "make_model", "sample_expectation", "string_order",
]
