"""Transverse cluster Hamiltonian on a periodic ring and its exact ground state."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .sim import MAX_QUBITS, PauliString

DEFAULT_EPSILON = 0.01
DEGENERACY_TOL = 1e-9


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClusterParams:
    n_qubits: int
    x: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not 2 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [2, {MAX_QUBITS}], got {self.n_qubits}")
        if not 0.0 <= self.x <= 1.0:
            raise ValueError(f"x must lie in [0, 1], got {self.x}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")


@dataclass(frozen=True)
class GroundStateResult:
    energy: float
    state: np.ndarray
    residual: float
    gap: float
    degenerate: bool


def _bits(n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    # column i-1 holds the bit of qubit i (qubit 1 most significant)
    return (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1


@lru_cache(maxsize=None)
def _term_tables(n: int):
    bits = _bits(n)
    z = 1 - 2 * bits  # Z eigenvalue per qubit
    idx = np.arange(2 ** n)
    zxz = []  # (flip mask of X on i+1, sign from Z_i Z_{i+2})
    for i in range(n):
        a, b, c = i, (i + 1) % n, (i + 2) % n
        zxz.append((1 << (n - 1 - b), z[:, a] * z[:, c]))
    x_masks = [1 << (n - 1 - i) for i in range(n)]
    z_sum = z.sum(axis=1)
    return idx, zxz, x_masks, z_sum


def cluster_terms(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense sum_i Z_i X_{i+1} Z_{i+2}, sum_i X_i and sum_i Z_i (periodic)."""
    if not 2 <= n <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [2, {MAX_QUBITS}], got {n}")
    idx, zxz, x_masks, z_sum = _term_tables(n)
    dim = 2 ** n
    h_zxz = np.zeros((dim, dim))
    h_x = np.zeros((dim, dim))
    # <j ^ mask| Z X Z |j> = sign(j); row index is the flipped state
    for mask, sign in zxz:
        np.add.at(h_zxz, (idx ^ mask, idx), sign)
    for mask in x_masks:
        h_x[idx ^ mask, idx] += 1
    return h_zxz, h_x, np.diag(z_sum.astype(float))


def build_hamiltonian(params: ClusterParams) -> np.ndarray:
    """H(x) = -cos(pi x/2) sum ZXZ - sin(pi x/2) sum X - eps sum Z, periodic ring."""
    h_zxz, h_x, h_z = cluster_terms(params.n_qubits)
    a = np.cos(np.pi * params.x / 2)
    b = np.sin(np.pi * params.x / 2)
    return -a * h_zxz - b * h_x - params.epsilon * h_z


def effective_x(J: float, h_x: float) -> float:
    if J < 0 or h_x < 0:
        raise ValueError("J and h_x must be non-negative")
    if J == 0 and h_x == 0:
        raise ValueError("J and h_x cannot both vanish")
    return float(2 / np.pi * np.arcsin(h_x / np.hypot(J, h_x)))


def effective_epsilon(J: float, h_x: float, h_z: float) -> float:
    if J == 0 and h_x == 0:
        raise ValueError("J and h_x cannot both vanish")
    return float(h_z / np.hypot(J, h_x))


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Make the first largest-magnitude amplitude real and positive."""
    mag = np.abs(v)
    k = int(np.argmax(mag > mag.max() - 1e-12))
    return v * (np.conj(v[k]) / mag[k])


@lru_cache(maxsize=4096)
def _ground_state_cached(n: int, x: float, epsilon: float) -> GroundStateResult:
    h = build_hamiltonian(ClusterParams(n, x, epsilon))
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigh failed for N={n}, x={x}, eps={epsilon}") from exc
    psi = fix_phase(v[:, 0].astype(complex))
    psi /= np.linalg.norm(psi)
    residual = float(np.linalg.norm(h @ psi - w[0] * psi))
    gap = float(w[1] - w[0]) if len(w) > 1 else np.inf
    psi.setflags(write=False)
    return GroundStateResult(float(w[0]), psi, residual, gap, gap < DEGENERACY_TOL)


def ground_state(params: ClusterParams) -> GroundStateResult:
    return _ground_state_cached(params.n_qubits, float(params.x), float(params.epsilon))


def string_order(n_qubits: int) -> PauliString:
    """Product of all ring stabilizers, (-1)^N X_1 ... X_N."""
    if n_qubits < 3:
        raise ValueError("string order needs at least 3 qubits")
    return PauliString("X" * n_qubits, -1 if n_qubits % 2 else 1)
