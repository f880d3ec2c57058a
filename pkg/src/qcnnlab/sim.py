"""Dense statevector simulation.

Qubits are labelled 1..N and qubit 1 is the most significant bit of the
basis index, so ``j = sum_i b_i * 2**(N - i)``.  States are plain complex
numpy arrays of length ``2**N``; batched kernels take arrays whose last
axis has that length.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_QUBITS = 12
MAX_DENSE_QUBITS = 10

_SQRT2_INV = 1 / np.sqrt(2)
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
SDG = np.array([[1, 0], [0, -1j]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

# number of angles each gate kind consumes
N_ANGLES = {"RX": 1, "RY": 1, "RZ": 1, "H": 0, "X": 0, "CZ": 0, "ZZ": 1,
            "SU2": 3, "CCX": 0, "CSU2": 3, "CRY": 1, "CRZ": 1, "SU4": 15}
# number of target qubits per kind (controls are extra)
N_TARGETS = {"RX": 1, "RY": 1, "RZ": 1, "H": 1, "X": 1, "CZ": 2, "ZZ": 2,
             "SU2": 1, "CCX": 1, "CSU2": 1, "CRY": 1, "CRZ": 1, "SU4": 2}
CONTROLLED = {"CCX", "CSU2", "CRY", "CRZ"}


class QubitIndexError(ValueError):
    pass


# --- batched single-gate matrices; angles have shape (B,) -------------------

def rx(t):
    t = np.asarray(t, dtype=float)
    c, s = np.cos(t / 2), np.sin(t / 2)
    m = np.empty(t.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = c
    m[..., 1, 1] = c
    m[..., 0, 1] = -1j * s
    m[..., 1, 0] = -1j * s
    return m


def ry(t):
    t = np.asarray(t, dtype=float)
    c, s = np.cos(t / 2), np.sin(t / 2)
    m = np.empty(t.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = c
    m[..., 1, 1] = c
    m[..., 0, 1] = -s
    m[..., 1, 0] = s
    return m


def rz(t):
    t = np.asarray(t, dtype=float)
    m = np.zeros(t.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = np.exp(-0.5j * t)
    m[..., 1, 1] = np.exp(0.5j * t)
    return m


def zz(t):
    t = np.asarray(t, dtype=float)
    m = np.zeros(t.shape + (4, 4), dtype=complex)
    for k, z in enumerate((1, -1, -1, 1)):
        m[..., k, k] = np.exp(-0.5j * t * z)
    return m


def su2(t1, t2, t3):
    """R_X(t1) R_Z(t2) R_X(t3); the rightmost rotation acts first."""
    return rx(t1) @ rz(t2) @ rx(t3)


def _su4_basis():
    labels = [a + b for a in "IXYZ" for b in "IXYZ"][1:]
    return labels, np.array([np.kron(PAULI[a], PAULI[b]) for a, b in labels])


SU4_LABELS, _SU4_GENERATORS = _su4_basis()


def su4(angles):
    """exp(-i/2 sum_k angles[k] P_k) over the 15 non-identity two-qubit Paulis."""
    angles = np.asarray(angles, dtype=float)
    gen = np.tensordot(angles, _SU4_GENERATORS, axes=([-1], [0])) / 2
    w, v = np.linalg.eigh(gen)
    return (v * np.exp(-1j * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def controlled(u, polarity: Sequence[int]):
    """Dense controlled block: controls come first (most significant)."""
    n_c = len(polarity)
    d = u.shape[-1]
    size = d * 2 ** n_c
    m = np.broadcast_to(np.eye(size, dtype=complex), u.shape[:-2] + (size, size)).copy()
    k = int("".join(str(p) for p in polarity), 2) if n_c else 0
    m[..., k * d:(k + 1) * d, :] = 0
    m[..., :, k * d:(k + 1) * d] = 0
    m[..., k * d:(k + 1) * d, k * d:(k + 1) * d] = u
    return m


def gate_matrix(kind: str, angles=None, polarity: Sequence[int] = ()):
    """Matrix for a gate kind.  ``angles`` may have a leading batch axis."""
    if angles is None:
        angles = np.zeros(0)
    angles = np.asarray(angles, dtype=float)
    a = [angles[..., i] for i in range(angles.shape[-1])]
    if kind == "RX":
        return rx(a[0])
    if kind == "RY":
        return ry(a[0])
    if kind == "RZ":
        return rz(a[0])
    if kind == "H":
        return H.copy()
    if kind == "X":
        return X.copy()
    if kind == "CZ":
        return np.diag([1, 1, 1, -1]).astype(complex)
    if kind == "ZZ":
        return zz(a[0])
    if kind == "SU2":
        return su2(*a)
    if kind == "SU4":
        return su4(angles)
    if kind == "CCX":
        return controlled(X, polarity)
    if kind == "CSU2":
        return controlled(su2(*a), polarity)
    if kind == "CRY":
        return controlled(ry(a[0]), polarity)
    if kind == "CRZ":
        return controlled(rz(a[0]), polarity)
    raise ValueError(f"unknown gate kind {kind!r}")


@dataclass(frozen=True)
class Gate:
    """A concrete gate.  ``qubits`` lists controls first, then targets."""

    kind: str
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    polarity: tuple[int, ...] = ()
    angles: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in N_ANGLES:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != N_TARGETS[self.kind]:
            raise ValueError(f"{self.kind} takes {N_TARGETS[self.kind]} target(s)")
        if len(self.angles) != N_ANGLES[self.kind]:
            raise ValueError(f"{self.kind} takes {N_ANGLES[self.kind]} angle(s)")
        if self.kind in CONTROLLED:
            if not self.controls or len(self.polarity) != len(self.controls):
                raise ValueError(f"{self.kind} needs controls with matching polarity")
            if any(p not in (0, 1) for p in self.polarity):
                raise ValueError("control polarity must be 0 or 1")
        elif self.controls:
            raise ValueError(f"{self.kind} takes no controls")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets

    def matrix(self) -> np.ndarray:
        return gate_matrix(self.kind, np.array(self.angles), self.polarity)


def check_qubits(qubits: Sequence[int], n: int) -> None:
    for q in qubits:
        if not 1 <= q <= n:
            raise QubitIndexError(f"qubit {q} out of range 1..{n}")
    if len(set(qubits)) != len(qubits):
        raise QubitIndexError(f"duplicate qubit indices {tuple(qubits)}")


def n_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[-1]
    n = dim.bit_length() - 1
    if dim != 1 << n or n < 1:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1
    return psi


def apply_matrix(states: np.ndarray, mat: np.ndarray, qubits: Sequence[int],
                 n: int | None = None) -> np.ndarray:
    """Apply a k-qubit matrix to ``qubits`` of every state in a batch.

    ``states`` has shape ``(*lead, 2**n)``.  ``mat`` is ``(d, d)`` or carries
    per-item matrices ``(*lead, d, d)`` (or ``(lead[0], d, d)`` shared over the
    remaining leading axes).
    """
    if n is None:
        n = n_qubits_of(states)
    lead = states.shape[:-1]
    nl = len(lead)
    k = len(qubits)
    d = 2 ** k
    psi = states.reshape(lead + (2,) * n)
    src = [nl + q - 1 for q in qubits]
    dst = list(range(nl + n - k, nl + n))
    psi = np.moveaxis(psi, src, dst)
    moved_shape = psi.shape
    if mat.ndim == 2:
        out = psi.reshape(-1, d) @ mat.T
    else:
        b = mat.shape[0]
        out = psi.reshape(b, -1, d) @ np.swapaxes(mat, -1, -2)
    out = np.moveaxis(out.reshape(moved_shape), dst, src)
    return out.reshape(lead + (2 ** n,))


def apply_gate(state: np.ndarray, gate: Gate) -> np.ndarray:
    n = n_qubits_of(state)
    check_qubits(gate.qubits, n)
    return apply_matrix(state, gate.matrix(), gate.qubits, n)


def apply_gates(state: np.ndarray, gates: Sequence[Gate]) -> np.ndarray:
    for g in gates:
        state = apply_gate(state, g)
    return state


@dataclass(frozen=True)
class PauliString:
    """Signed tensor product of single-qubit Paulis, e.g. ``PauliString("XXX", -1)``."""

    factors: str
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        if not self.factors or set(self.factors) - set("IXYZ"):
            raise ValueError(f"bad Pauli factors {self.factors!r}")

    @classmethod
    def single(cls, n: int, qubit: int, pauli: str, sign: int = 1) -> "PauliString":
        check_qubits([qubit], n)
        f = ["I"] * n
        f[qubit - 1] = pauli
        return cls("".join(f), sign)

    @classmethod
    def on(cls, n: int, paulis: dict[int, str], sign: int = 1) -> "PauliString":
        check_qubits(list(paulis), n)
        f = ["I"] * n
        for q, p in paulis.items():
            f[q - 1] = p
        return cls("".join(f), sign)

    @property
    def n_qubits(self) -> int:
        return len(self.factors)

    def support(self) -> list[int]:
        return [i + 1 for i, p in enumerate(self.factors) if p != "I"]

    def matrix(self) -> np.ndarray:
        if self.n_qubits > MAX_DENSE_QUBITS:
            raise ValueError(f"dense Pauli matrix limited to {MAX_DENSE_QUBITS} qubits")
        m = np.ones((1, 1), dtype=complex)
        for p in self.factors:
            m = np.kron(m, PAULI[p])
        return self.sign * m

    def __str__(self):
        return ("-" if self.sign < 0 else "+") + self.factors


def _check_obs(states: np.ndarray, obs: PauliString) -> int:
    n = n_qubits_of(states)
    if obs.n_qubits != n:
        raise ValueError(f"observable acts on {obs.n_qubits} qubits, state has {n}")
    return n


def apply_pauli(states: np.ndarray, obs: PauliString) -> np.ndarray:
    n = _check_obs(states, obs)
    out = states
    for q in obs.support():
        out = apply_matrix(out, PAULI[obs.factors[q - 1]], [q], n)
    return obs.sign * out


def expectation(states: np.ndarray, obs: PauliString) -> np.ndarray | float:
    """<psi|O|psi> for a state or a batch of states (last axis = amplitudes)."""
    val = np.einsum("...i,...i->...", np.conj(states), apply_pauli(states, obs)).real
    return float(val) if np.ndim(val) == 0 else val


@lru_cache(maxsize=None)
def _parity_table(n: int, support: tuple[int, ...]) -> np.ndarray:
    idx = np.arange(2 ** n)
    bits = np.zeros(2 ** n, dtype=int)
    for q in support:
        bits ^= (idx >> (n - q)) & 1
    return 1 - 2 * bits


def eigenbasis_rotation(states: np.ndarray, obs: PauliString) -> np.ndarray:
    """Rotate so the observable becomes diagonal (Z-type) on its support."""
    n = _check_obs(states, obs)
    out = states
    for q in obs.support():
        p = obs.factors[q - 1]
        if p == "X":
            out = apply_matrix(out, H, [q], n)
        elif p == "Y":
            out = apply_matrix(out, H @ SDG, [q], n)
    return out


def sample_counts(probs: np.ndarray, n_shots: int, rng: np.random.Generator) -> np.ndarray:
    probs = np.clip(probs, 0, None)
    probs = probs / probs.sum(axis=-1, keepdims=True)
    return rng.multinomial(n_shots, probs)


def sample_pauli(states: np.ndarray, obs: PauliString, n_shots: int,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Shot estimates and per-shot sample variances for a batch of states."""
    if n_shots < 1:
        raise ValueError("n_shots must be at least 1")
    n = _check_obs(states, obs)
    probs = np.abs(eigenbasis_rotation(states, obs)) ** 2
    counts = sample_counts(probs, n_shots, rng)
    parity = _parity_table(n, tuple(obs.support()))
    mean = counts @ parity / n_shots
    var = 1.0 - mean ** 2  # outcomes are +-1
    return obs.sign * mean, var


def sample_expectation(state: np.ndarray, obs: PauliString, n_shots: int,
                       rng_seed: int) -> tuple[float, float]:
    """Finite-shot estimate of <O>, with the empirical variance of the outcomes."""
    rng = np.random.default_rng(rng_seed)
    est, var = sample_pauli(state[None, :], obs, n_shots, rng)
    return float(est[0]), float(max(var[0], 0.0))


def circuit_unitary(gates: Sequence[Gate], n: int) -> np.ndarray:
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense unitary limited to {MAX_DENSE_QUBITS} qubits, got {n}")
    # columns are basis states; evolve them all as a batch
    u = np.eye(2 ** n, dtype=complex)
    for g in gates:
        check_qubits(g.qubits, n)
        u = apply_matrix(u, g.matrix(), g.qubits, n)
    return u.T


def conjugate_operator(gates: Sequence[Gate], obs: PauliString) -> np.ndarray:
    """U^dagger O U for the circuit unitary U, as a dense matrix."""
    n = obs.n_qubits
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense conjugation limited to {MAX_DENSE_QUBITS} qubits, got {n}")
    u = circuit_unitary(gates, n)
    return np.conj(u.T) @ obs.matrix() @ u
