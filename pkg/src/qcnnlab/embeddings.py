"""Feature maps x -> state: the ground-state (hidden) map and the R_Y Fourier map."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hamiltonian import DEFAULT_EPSILON, ClusterParams, ground_state
from .sim import ry

GROUND_STATE = "ground_state"
FOURIER = "fourier"


@dataclass(frozen=True)
class EmbeddingSpec:
    kind: str
    n_qubits: int = 9
    epsilon: float = DEFAULT_EPSILON
    eta: float = 2.0

    def __post_init__(self):
        if self.kind not in (GROUND_STATE, FOURIER):
            raise ValueError(f"unknown embedding kind {self.kind!r}")
        if self.kind == FOURIER and not self.eta > 0:
            raise ValueError("Fourier embedding needs eta > 0")
        if self.kind == GROUND_STATE and self.epsilon < 0:
            raise ValueError("ground-state embedding needs epsilon >= 0")

    def label(self) -> str:
        if self.kind == GROUND_STATE:
            return f"GS(N={self.n_qubits}, eps={self.epsilon:g})"
        return f"Fourier(N={self.n_qubits}, eta={self.eta:g})"


def fourier_state(n: int, angle: float) -> np.ndarray:
    """prod_i R_Y(angle)|0>: a product of identical single-qubit states."""
    q = ry(angle)[:, 0]
    psi = np.ones(1, dtype=complex)
    for _ in range(n):
        psi = np.kron(psi, q)
    return psi


def embed(spec: EmbeddingSpec, x: float) -> np.ndarray:
    if spec.kind == GROUND_STATE:
        return ground_state(ClusterParams(spec.n_qubits, float(x), spec.epsilon)).state
    return fourier_state(spec.n_qubits, spec.eta * float(x))


def embed_many(spec: EmbeddingSpec, xs) -> np.ndarray:
    return np.array([embed(spec, x) for x in np.atleast_1d(xs)])


def bitstring_labels(n: int) -> list[str]:
    return [format(j, f"0{n}b") for j in range(2 ** n)]


@dataclass
class BasisDump:
    x_grid: np.ndarray
    probabilities: np.ndarray  # rows: x values, columns: basis index j

    def labels(self) -> list[str]:
        return bitstring_labels(self.probabilities.shape[1].bit_length() - 1)


def basis_dump(spec: EmbeddingSpec, x_grid) -> BasisDump:
    """Squared projections |<j|psi(x)>|^2 on the computational basis."""
    x_grid = np.asarray(x_grid, dtype=float)
    return BasisDump(x_grid, np.abs(embed_many(spec, x_grid)) ** 2)


def antidiagonal_products(spec: EmbeddingSpec, x_grid) -> np.ndarray:
    """Re[phi_j^* phi_jbar(x)], with jbar the bitwise complement of j.

    X^N only connects j with jbar, so each row sums to <X_1...X_N>; times
    (-1)^N that is the string-order expectation.
    """
    if spec.kind != GROUND_STATE:
        raise ValueError("antidiagonal products are defined for the ground-state embedding")
    psi = embed_many(spec, x_grid)
    comp = (2 ** spec.n_qubits - 1) - np.arange(2 ** spec.n_qubits)
    return np.real(np.conj(psi) * psi[:, comp])
