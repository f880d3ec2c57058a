import numpy as np
import pytest

from qcnnlab.circuits import (ARBITRARY, FIXED, GUIDED, KEPT_FIRST, Circuit, build_arbitrary_ansatz,
                              build_fixed_qcnn, build_guided_ansatz, cz_ring, fixed_guided_binding,
                              guided_conv_layer, make_model, model_value, pivot_layer,
                              stage_readouts)
from qcnnlab.embeddings import EmbeddingSpec, embed_many
from qcnnlab.hamiltonian import ClusterParams, cluster_terms, ground_state, string_order
from qcnnlab.sim import Gate, PauliString, apply_gate, conjugate_operator, expectation

GRID = np.linspace(0, 1, 101)


@pytest.fixture(scope="module")
def gs_states():
    return embed_many(EmbeddingSpec("ground_state", 9, epsilon=0.01), GRID)


def cluster_state(n=9):
    return ground_state(ClusterParams(n, 0.0, 0.0)).state


def translation(n):
    """Permutation matrix moving qubit i to qubit i+1 (mod n)."""
    t = np.zeros((2 ** n, 2 ** n))
    for j in range(2 ** n):
        bits = format(j, f"0{n}b")
        t[int(bits[-1] + bits[:-1], 2), j] = 1
    return t


# --- pivot ----------------------------------------------------------------------------

def test_pivot_zero_is_identity():
    np.testing.assert_allclose(pivot_layer(5, 0.0).unitary(), np.eye(32), atol=1e-15)


@pytest.mark.parametrize("n", [4, 6])
def test_pivot_maps_cluster_to_paramagnet_even_n(n):
    u = pivot_layer(n, np.pi / 2).unitary()
    h_zxz, h_x, _ = cluster_terms(n)
    assert np.max(np.abs(u @ h_zxz @ u.conj().T - h_x)) <= 1e-10


def test_pivot_odd_ring_has_a_seam():
    u = pivot_layer(9, np.pi / 2).unitary()
    h_zxz, h_x, _ = cluster_terms(9)
    assert np.max(np.abs(u @ h_zxz @ u.conj().T - h_x)) > 0.5


@pytest.mark.parametrize("n", [3, 4, 5, 9])
def test_cz_ring_maps_cluster_to_paramagnet_any_n(n):
    c = Circuit(n)
    cz_ring(c, range(1, n + 1))
    u = c.unitary()
    h_zxz, h_x, _ = cluster_terms(n)
    assert np.max(np.abs(u @ h_zxz @ u.conj().T - h_x)) <= 1e-10


def test_pivot_gates_commute():
    c = pivot_layer(6, 0.37)
    rev = Circuit(6, list(reversed(c.gates)))
    np.testing.assert_allclose(c.unitary(), rev.unitary(), atol=1e-12)


def test_pivot_too_small():
    with pytest.raises(ValueError):
        pivot_layer(2, 0.1)


# --- fixed network ----------------------------------------------------------------------

def test_fixed_requires_nine_qubits():
    for builder in (build_fixed_qcnn, build_guided_ansatz, build_arbitrary_ansatz):
        with pytest.raises(ValueError):
            builder(8)


def test_stage_b_is_all_zero_on_cluster_state():
    out = build_fixed_qcnn().run(cluster_state(), stop="B")
    assert abs(out[0]) ** 2 >= 1 - 1e-9


def test_dressed_operator_is_string_of_x():
    c = build_fixed_qcnn()
    dressed = conjugate_operator(c.bind(), PauliString.single(9, 5, "X", -1))
    ref = PauliString("X" * 9).matrix()
    err = min(np.linalg.norm(dressed - ref), np.linalg.norm(dressed + ref))
    assert err <= 1e-10


def test_stage_d_matches_string_order(gs_states):
    c = build_fixed_qcnn()
    reads = stage_readouts()
    a = expectation(gs_states, reads["A"])
    d = expectation(c.run(gs_states), reads["D"])
    np.testing.assert_allclose(d, -a, atol=1e-8)
    cc = expectation(c.run(gs_states, stop="C"), reads["C"])
    np.testing.assert_allclose(cc, a, atol=1e-8)


@pytest.mark.parametrize("site", range(1, 10))
def test_single_x_error_is_corrected(site):
    c = build_fixed_qcnn()
    psi = cluster_state()
    noisy = apply_gate(psi, Gate("X", (site,)))
    readout = stage_readouts()["D"]
    clean = expectation(c.run(psi), readout)
    assert expectation(c.run(noisy), readout) == pytest.approx(clean, abs=1e-8)
    assert clean == pytest.approx(-1.0, abs=1e-8)


@pytest.mark.parametrize("site", [4, 6])
def test_errors_next_to_the_readout_flip_it_without_pooling(site):
    bare = build_fixed_qcnn(pooling=False)
    noisy = apply_gate(cluster_state(), Gate("X", (site,)))
    assert expectation(bare.run(noisy), stage_readouts()["D"]) == pytest.approx(1.0, abs=1e-8)


def test_no_pooling_blurs_the_boundary(gs_states):
    pooled, bare = build_fixed_qcnn(), build_fixed_qcnn(pooling=False)
    reads = stage_readouts()
    a = expectation(gs_states, reads["A"])
    dev_pooled = np.max(np.abs(-expectation(pooled.run(gs_states), reads["D"]) - a))
    dev_bare = np.max(np.abs(-expectation(bare.run(gs_states), reads["D"]) - a))
    assert dev_bare > dev_pooled
    window = (GRID >= 0.4) & (GRID <= 0.6)
    dev3 = np.abs(expectation(bare.run(gs_states, stop="C"), reads["C"]) - a)
    assert dev3[window].max() >= 0.05


def test_fixed_model_values():
    model = make_model(FIXED)
    assert model.n_params == 0
    assert model_value(model, [], ground_state(ClusterParams(9, 0.0, 0.01)).state) == \
        pytest.approx(-1, abs=1e-2)
    assert model_value(model, [], cluster_state()) == pytest.approx(-1, abs=1e-6)
    assert model_value(model, [], ground_state(ClusterParams(9, 1.0, 0.0)).state) == \
        pytest.approx(1, abs=1e-6)


def test_listing_marks_stages():
    text = build_fixed_qcnn().listing()
    for stage in "ABCD":
        assert f"--- stage {stage}" in text
    assert "CCX ctrl[" in text


# --- trainable ansatze ------------------------------------------------------------------

def test_guided_slot_count():
    c = build_guided_ansatz()
    assert c.n_params == 28 == len(c.slot_names)
    assert all(gates for _, gates in c.slot_usage())


def test_guided_binding_reproduces_fixed(gs_states):
    fixed = make_model(FIXED).values([], gs_states)
    guided = make_model(GUIDED).values(fixed_guided_binding(), gs_states)
    np.testing.assert_allclose(guided, -fixed, atol=1e-8)


def test_guided_zero_params_read_raw_x5():
    model = make_model(GUIDED)
    rng = np.random.default_rng(2)
    psi = rng.normal(size=512) + 1j * rng.normal(size=512)
    psi /= np.linalg.norm(psi)
    assert model.value(np.zeros(28), psi) == pytest.approx(
        expectation(psi, PauliString.single(9, 5, "X")), abs=1e-12)


def test_guided_conv_layer_is_translation_invariant():
    c = Circuit(9)
    guided_conv_layer(c, range(1, 10))
    u = c.unitary(np.random.default_rng(3).uniform(-np.pi, np.pi, 7))
    t = translation(9)
    np.testing.assert_allclose(t @ u @ t.T, u, atol=1e-12)
    # rebuilding on relabelled qubits gives the same unitary
    shifted = Circuit(9)
    guided_conv_layer(shifted, [2, 3, 4, 5, 6, 7, 8, 9, 1])
    np.testing.assert_allclose(shifted.unitary(np.random.default_rng(3).uniform(-np.pi, np.pi, 7)),
                               u, atol=1e-12)


def test_arbitrary_zero_angles_identity():
    c = build_arbitrary_ansatz()
    np.testing.assert_allclose(c.unitary(np.zeros(c.n_params)), np.eye(512), atol=1e-12)


@pytest.mark.parametrize("ansatz", [GUIDED, ARBITRARY])
def test_bound_circuits_are_unitary(ansatz):
    c = make_model(ansatz).circuit
    u = c.unitary(np.random.default_rng(5).uniform(-np.pi, np.pi, c.n_params))
    assert np.max(np.abs(u.conj().T @ u - np.eye(512))) <= 1e-12


@pytest.mark.parametrize("ansatz", [GUIDED, ARBITRARY])
def test_batched_run_matches_single(ansatz, gs_states):
    model = make_model(ansatz)
    params = np.random.default_rng(8).uniform(-np.pi, np.pi, (3, model.n_params))
    states = gs_states[::25]
    batch = model.values(params, states)
    assert batch.shape == (3, len(states))
    for b in range(3):
        np.testing.assert_allclose(batch[b], model.values(params[b], states), atol=1e-12)
        single = [expectation(np.asarray(model.circuit.unitary(params[b]) @ s), model.readout)
                  for s in states]
        np.testing.assert_allclose(batch[b], single, atol=1e-10)


def test_values_bounded_and_param_length_checked(gs_states):
    model = make_model(GUIDED)
    vals = model.values(np.random.default_rng(0).uniform(-9, 9, (4, 28)), gs_states)
    assert np.all(np.abs(vals) <= 1 + 1e-12)
    with pytest.raises(ValueError):
        model.values(np.zeros(27), gs_states)


def test_unknown_ansatz():
    with pytest.raises(ValueError):
        make_model("geometric")


def test_kept_qubits_nested():
    assert 5 in KEPT_FIRST
    assert make_model(GUIDED).readout.support() == [5]
