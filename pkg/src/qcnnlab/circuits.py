"""QCNN circuits on nine qubits: the fixed 9-3-1 network and two trainable ansatze.

Parametrised gates reference shared slots through :class:`SlotRef`, so a
single trainable angle can feed every gate of a translationally invariant
layer.  Circuits are evaluated on batches of parameter vectors and input
states at once, which is what makes finite-difference training cheap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .sim import (Gate, PauliString, apply_matrix, check_qubits, expectation,
                  gate_matrix, sample_pauli, N_ANGLES)

FIXED = "fixed"
GUIDED = "guided"
ARBITRARY = "arbitrary"
ANSATZE = (FIXED, GUIDED, ARBITRARY)

KEPT_FIRST = (2, 5, 8)
KEPT_FINAL = 5
FUSE_MAX_QUBITS = 3


@dataclass(frozen=True)
class SlotRef:
    slot: int
    scale: float = 1.0

    def __str__(self):
        return f"{'-' if self.scale < 0 else ''}p[{self.slot}]"


@dataclass(frozen=True)
class GateTemplate:
    kind: str
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    polarity: tuple[int, ...] = ()
    angles: tuple = ()  # floats or SlotRefs

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets

    @property
    def parametric(self) -> bool:
        return any(isinstance(a, SlotRef) for a in self.angles)

    def bind(self, params: np.ndarray) -> Gate:
        vals = tuple(float(a.scale * params[a.slot]) if isinstance(a, SlotRef) else float(a)
                     for a in self.angles)
        return Gate(self.kind, self.targets, self.controls, self.polarity, vals)

    def angle_array(self, params: np.ndarray) -> np.ndarray:
        """Angles for a batch of parameter vectors, shape (B, n_angles)."""
        cols = [a.scale * params[:, a.slot] if isinstance(a, SlotRef)
                else np.full(params.shape[0], float(a)) for a in self.angles]
        return np.stack(cols, axis=1) if cols else np.zeros((params.shape[0], 0))

    def describe(self) -> str:
        s = self.kind
        if self.angles:
            s += "(" + ", ".join(str(a) if isinstance(a, SlotRef) else f"{a:.6g}"
                                 for a in self.angles) + ")"
        if self.controls:
            ctl = ",".join(f"{c}{'' if p else '~'}" for c, p in zip(self.controls, self.polarity))
            s += f" ctrl[{ctl}]"
        return s + " on " + ",".join(map(str, self.targets))


@dataclass
class Circuit:
    n_qubits: int
    gates: list[GateTemplate] = field(default_factory=list)
    n_params: int = 0
    slot_names: list[str] = field(default_factory=list)
    stages: dict[str, int] = field(default_factory=dict)

    def add(self, kind, targets, controls=(), polarity=(), angles=()):
        targets, controls = tuple(targets), tuple(controls)
        check_qubits(controls + targets, self.n_qubits)
        g = GateTemplate(kind, targets, controls, tuple(polarity), tuple(angles))
        Gate(kind, targets, controls, tuple(polarity), (0.0,) * N_ANGLES[kind])  # validates shape
        self.gates.append(g)
        return g

    def new_slots(self, name: str, count: int) -> list[SlotRef]:
        refs = [SlotRef(self.n_params + i) for i in range(count)]
        self.slot_names += [f"{name}[{i}]" for i in range(count)] if count > 1 else [name]
        self.n_params += count
        return refs

    def mark(self, stage: str) -> None:
        self.stages[stage] = len(self.gates)

    def extend(self, other: "Circuit") -> None:
        if other.n_params:
            raise ValueError("only parameter-free circuits can be appended")
        self.gates += other.gates

    def slot_usage(self) -> list[tuple[int, list[int]]]:
        """(slot, positions of gates fed by it) for every slot."""
        use: list[tuple[int, list[int]]] = [(s, []) for s in range(self.n_params)]
        for pos, g in enumerate(self.gates):
            for a in g.angles:
                if isinstance(a, SlotRef) and pos not in use[a.slot][1]:
                    use[a.slot][1].append(pos)
        return use

    def _check_params(self, params) -> np.ndarray:
        params = np.zeros(0) if params is None else np.asarray(params, dtype=float)
        if params.shape[-1:] != (self.n_params,) and not (self.n_params == 0 and params.size == 0):
            raise ValueError(f"expected {self.n_params} parameters, got shape {params.shape}")
        return params

    def bind(self, params=None, stop: str | None = None) -> list[Gate]:
        params = self._check_params(params)
        end = self.stages[stop] if stop else len(self.gates)
        return [g.bind(params) for g in self.gates[:end]]

    def _segment(self, stop: str | None) -> list[GateTemplate]:
        return self.gates[: self.stages[stop]] if stop else self.gates

    def run(self, states: np.ndarray, params=None, stop: str | None = None) -> np.ndarray:
        """Evolve input states (M, 2^N) under a batch of parameter vectors.

        ``params`` of shape (P,) gives output (M, 2^N); shape (B, P) gives
        (B, M, 2^N).
        """
        params = self._check_params(params)
        single = params.ndim <= 1
        pb = params.reshape(1, -1) if single else params
        states = np.asarray(states, dtype=complex)
        squeeze_state = states.ndim == 1
        psi = np.broadcast_to(states.reshape(1, -1, 2 ** self.n_qubits),
                              (pb.shape[0],) + states.reshape(-1, 2 ** self.n_qubits).shape)
        psi = np.ascontiguousarray(psi)
        for qubits, mat in _fused_matrices(self._segment(stop), pb, self.n_qubits):
            psi = apply_matrix(psi, mat, qubits, self.n_qubits)
        if squeeze_state:
            psi = psi[:, 0]
        return psi[0] if single else psi

    def unitary(self, params=None, stop: str | None = None) -> np.ndarray:
        from .sim import circuit_unitary
        return circuit_unitary(self.bind(params, stop), self.n_qubits)

    def listing(self) -> str:
        marks = {}
        for name, pos in self.stages.items():
            marks.setdefault(pos, []).append(name)
        lines = [f"# {self.n_qubits} qubits, {self.n_params} parameter slots"]
        for pos, g in enumerate(self.gates):
            for name in marks.get(pos, []):
                lines.append(f"--- stage {name}")
            lines.append(f"{pos:4d}  {g.describe()}")
        for name in marks.get(len(self.gates), []):
            lines.append(f"--- stage {name}")
        return "\n".join(lines)


def _fused_matrices(gates: Sequence[GateTemplate], params: np.ndarray, n: int):
    """Greedily merge consecutive gates whose joint support stays small."""
    groups: list[list[GateTemplate]] = []
    support: list[int] = []
    for g in gates:
        merged = support + [q for q in g.qubits if q not in support]
        if groups and len(merged) <= FUSE_MAX_QUBITS:
            groups[-1].append(g)
            support = merged
        else:
            groups.append([g])
            support = list(g.qubits)
    cache: dict = {}
    out = []
    for group in groups:
        qubits: list[int] = []
        for g in group:
            qubits += [q for q in g.qubits if q not in qubits]
        k = len(qubits)
        local = {q: i + 1 for i, q in enumerate(qubits)}
        if len(group) == 1:
            out.append((list(qubits), _template_matrix(group[0], params, cache)))
            continue
        # rows evolve as states: U applied to basis vectors gives U^T
        acc = np.eye(2 ** k, dtype=complex)[None]
        for g in group:
            m = _template_matrix(g, params, cache)
            acc = apply_matrix(acc if m.ndim == 2 else np.broadcast_to(acc, (m.shape[0],) + acc.shape[1:]),
                               m, [local[q] for q in g.qubits], k)
        mat = np.swapaxes(acc, -1, -2)
        out.append((qubits, mat[0] if mat.shape[0] == 1 else mat))
    return out


def _template_matrix(g: GateTemplate, params: np.ndarray, cache: dict) -> np.ndarray:
    key = (g.kind, g.polarity, g.angles)
    if key not in cache:
        if g.parametric:
            cache[key] = gate_matrix(g.kind, g.angle_array(params), g.polarity)
        else:
            cache[key] = gate_matrix(g.kind, np.array([float(a) for a in g.angles]), g.polarity)
    return cache[key]


# --- layers ------------------------------------------------------------------

def ring_pairs(qubits: Sequence[int]) -> list[tuple[int, int]]:
    q = list(qubits)
    return [(q[i], q[(i + 1) % len(q)]) for i in range(len(q))]


def pivot_layer(n_qubits: int, theta: float) -> Circuit:
    """prod_j ZZ((-1)^j theta) on the ring bonds (j, j+1).

    At theta = pi/2 this is exp(-i pi/4 sum_j (-1)^j Z_j Z_{j+1}).  For odd
    rings the alternation breaks at the bond (N, 1).
    """
    if n_qubits < 3:
        raise ValueError("pivot layer needs at least 3 qubits")
    c = Circuit(n_qubits)
    for j, (a, b) in enumerate(ring_pairs(range(1, n_qubits + 1)), start=1):
        c.add("ZZ", (a, b), angles=((-1) ** j * theta,))
    return c


def cz_ring(c: Circuit, qubits: Sequence[int]) -> None:
    for a, b in ring_pairs(qubits):
        c.add("CZ", (a, b))


def _correct(c: Circuit, ring: Sequence[int], targets: Sequence[int]) -> None:
    """Toffolis flipping each target when a next-nearest/nearest bit pair reads (1, 0)."""
    ring = list(ring)
    m = len(ring)
    for k in targets:
        i = ring.index(k)
        for step in (-1, 1):
            far, near = ring[(i + 2 * step) % m], ring[(i + step) % m]
            c.add("CCX", (k,), controls=(far, near), polarity=(1, 0))


def build_fixed_qcnn(n_qubits: int = 9, pooling: bool = True) -> Circuit:
    """The fixed 9-3-1 network with stage markers A-D.

    UNPREPARE is the CZ ring followed by Hadamards; CORRECT layers are
    removed when ``pooling`` is False.
    """
    if n_qubits != 9:
        raise ValueError("the fixed QCNN is defined for 9 qubits")
    all_q = list(range(1, 10))
    c = Circuit(9)
    c.mark("A")
    cz_ring(c, all_q)
    for q in all_q:
        c.add("H", (q,))
    c.mark("B")
    if pooling:
        _correct(c, all_q, KEPT_FIRST)
    for q in KEPT_FIRST:
        c.add("H", (q,))
    cz_ring(c, KEPT_FIRST)
    c.mark("C")
    cz_ring(c, KEPT_FIRST)
    for q in KEPT_FIRST:
        c.add("H", (q,))
    if pooling:
        _correct(c, KEPT_FIRST, (KEPT_FINAL,))
    c.add("H", (KEPT_FINAL,))
    c.mark("D")
    return c


def _su2_inverse(refs: Sequence[SlotRef]) -> tuple[SlotRef, ...]:
    # (R_X(a) R_Z(b) R_X(c))^dagger = R_X(-c) R_Z(-b) R_X(-a)
    return tuple(SlotRef(r.slot, -r.scale) for r in reversed(refs))


def _trainable_toffolis(c: Circuit, ring: Sequence[int], targets: Sequence[int], tag: str):
    tgt = c.new_slots(f"{tag}.target", 3)
    d_far = c.new_slots(f"{tag}.dress_far", 3)
    d_near = c.new_slots(f"{tag}.dress_near", 3)
    ring = list(ring)
    m = len(ring)
    for k in targets:
        i = ring.index(k)
        for step in (-1, 1):
            far, near = ring[(i + 2 * step) % m], ring[(i + step) % m]
            c.add("SU2", (far,), angles=d_far)
            c.add("SU2", (near,), angles=d_near)
            c.add("CSU2", (k,), controls=(far, near), polarity=(1, 1), angles=tgt)
            c.add("SU2", (far,), angles=_su2_inverse(d_far))
            c.add("SU2", (near,), angles=_su2_inverse(d_near))


def guided_conv_layer(c: Circuit, qubits: Sequence[int]) -> None:
    """SU2 layer, uniform ZZ ring, SU2 layer: seven shared slots."""
    a = c.new_slots("conv.su2_in", 3)
    b = c.new_slots("conv.zz", 1)
    s = c.new_slots("conv.su2_out", 3)
    for q in qubits:
        c.add("SU2", (q,), angles=a)
    for p in ring_pairs(qubits):
        c.add("ZZ", p, angles=b)
    for q in qubits:
        c.add("SU2", (q,), angles=s)


def build_guided_ansatz(n_qubits: int = 9) -> Circuit:
    """Trainable counterpart of the fixed network, 7 + 9 + 9 + 3 = 28 slots."""
    if n_qubits != 9:
        raise ValueError("the guided ansatz is defined for 9 qubits")
    c = Circuit(9)
    c.mark("A")
    guided_conv_layer(c, range(1, 10))
    c.mark("B")
    _trainable_toffolis(c, range(1, 10), KEPT_FIRST, "pool1")
    c.mark("C")
    _trainable_toffolis(c, KEPT_FIRST, (KEPT_FINAL,), "pool2")
    c.add("SU2", (KEPT_FINAL,), angles=c.new_slots("final.su2", 3))
    c.mark("D")
    return c


def _brick_pairs(qubits: Sequence[int]) -> list[tuple[int, int]]:
    pairs = ring_pairs(qubits)
    if len(pairs) <= 3:
        return pairs
    return pairs[0::2] + pairs[1::2]


def _controlled_rotation_pool(c: Circuit, ring: Sequence[int], kept: Sequence[int], tag: str):
    z, y = c.new_slots(f"{tag}.crz", 1), c.new_slots(f"{tag}.cry", 1)
    ring = list(ring)
    for k in kept:
        i = ring.index(k)
        for d in (ring[i - 1], ring[(i + 1) % len(ring)]):
            c.add("CRZ", (k,), controls=(d,), polarity=(1,), angles=z)
            c.add("CRY", (k,), controls=(d,), polarity=(0,), angles=y)


def build_arbitrary_ansatz(n_qubits: int = 9) -> Circuit:
    """General two-qubit convolutions with controlled-rotation pooling, 9-3-1."""
    if n_qubits != 9:
        raise ValueError("the arbitrary ansatz is defined for 9 qubits")
    c = Circuit(9)
    c.mark("A")
    w = c.new_slots("conv1.su4", 15)
    for p in _brick_pairs(range(1, 10)):
        c.add("SU4", p, angles=w)
    c.mark("B")
    _controlled_rotation_pool(c, range(1, 10), KEPT_FIRST, "pool1")
    w = c.new_slots("conv2.su4", 15)
    for p in _brick_pairs(KEPT_FIRST):
        c.add("SU4", p, angles=w)
    c.mark("C")
    _controlled_rotation_pool(c, KEPT_FIRST, (KEPT_FINAL,), "pool2")
    c.mark("D")
    return c


# --- models ------------------------------------------------------------------

FIXED_READOUT_SIGN = -1


@dataclass
class QcnnModel:
    """Circuit plus readout; the model value is <psi| C^dag O C |psi>."""

    ansatz: str
    circuit: Circuit
    readout: PauliString

    @property
    def n_params(self) -> int:
        return self.circuit.n_params

    def values(self, params, states: np.ndarray) -> np.ndarray:
        """Exact values; params (P,) -> (M,), params (B, P) -> (B, M)."""
        return expectation(self.circuit.run(states, params), self.readout)

    def sampled_values(self, params, states: np.ndarray, shots: int,
                       rng: np.random.Generator) -> np.ndarray:
        est, _ = sample_pauli(self.circuit.run(states, params), self.readout, shots, rng)
        return est

    def value(self, params, state: np.ndarray) -> float:
        return float(self.values(params, np.asarray(state)[None, :])[0])

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-np.pi, np.pi, self.n_params)


def make_model(ansatz: str, n_qubits: int = 9) -> QcnnModel:
    x5 = lambda sign: PauliString.single(n_qubits, KEPT_FINAL, "X", sign)
    if ansatz == FIXED:
        return QcnnModel(FIXED, build_fixed_qcnn(n_qubits), x5(FIXED_READOUT_SIGN))
    if ansatz == GUIDED:
        return QcnnModel(GUIDED, build_guided_ansatz(n_qubits), x5(1))
    if ansatz == ARBITRARY:
        return QcnnModel(ARBITRARY, build_arbitrary_ansatz(n_qubits), x5(1))
    raise ValueError(f"unknown ansatz {ansatz!r}; choose from {ANSATZE}")


def model_value(model: QcnnModel, params, state: np.ndarray) -> float:
    return model.value(params, state)


def stage_readouts(n_qubits: int = 9) -> dict[str, PauliString]:
    """Observables read at each stage of the fixed network."""
    return {
        "A": PauliString("X" * n_qubits, -1 if n_qubits % 2 else 1),
        "C": PauliString.on(n_qubits, {q: "X" for q in KEPT_FIRST}, -1),
        "D": PauliString.single(n_qubits, KEPT_FINAL, "X", FIXED_READOUT_SIGN),
    }


def fixed_guided_binding() -> np.ndarray:
    """Guided-ansatz angles reproducing the fixed network (readout sign aside).

    ZZ(-pi/2) on the ring times R_Z(pi) on every qubit is the CZ ring up to a
    global phase, and H R_Z(pi) is R_Y(pi/2) up to phase.
    """
    half = np.pi / 2
    conv = [0, 0, 0, -half, half, -half, -half]
    pool = [np.pi, 0, 0, 0, 0, 0, np.pi, 0, 0]
    final = [half, half, half]
    return np.array(conv + pool + pool + final, dtype=float)
