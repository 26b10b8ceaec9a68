import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from spectral_forrelation.circuit_sim import (
    HADAMARD,
    MAX_QUBITS,
    PhaseOracle,
    QueryProgram,
    QueryStage,
    StateVector,
    UnitaryStage,
    apply_hadamard_register,
    apply_phase_oracle,
    apply_unitary,
    direct_accept_prob,
    parse_program,
    qma_verifier_accept_prob,
    repeated_verifier,
    run_program,
    serialize_program,
    verifier_state,
)
from spectral_forrelation.hypercube import ContractError
from spectral_forrelation.instances import Instance, StrongParams, sample_strong, spectral_forrelation
from spectral_forrelation.streams import stream


def random_state(num_qubits, seed):
    rng = stream(seed, "state")
    v = rng.normal(size=1 << num_qubits) + 1j * rng.normal(size=1 << num_qubits)
    return StateVector(v / np.linalg.norm(v), num_qubits)


def kron_operator(num_qubits, matrix, targets):
    """Independent oracle: full 2^N matrix for a gate on contiguous or permuted targets."""
    N = 1 << num_qubits
    k = len(targets)
    full = np.zeros((N, N), dtype=complex)
    for col in range(N):
        bits = [(col >> (num_qubits - 1 - q)) & 1 for q in range(num_qubits)]
        sub = sum(bits[t] << (k - 1 - i) for i, t in enumerate(targets))
        for out in range(1 << k):
            new = list(bits)
            for i, t in enumerate(targets):
                new[t] = (out >> (k - 1 - i)) & 1
            row = sum(b << (num_qubits - 1 - q) for q, b in enumerate(new))
            full[row, col] += matrix[out, sub]
    return full


@pytest.mark.parametrize("targets", [(0,), (2,), (1, 3), (3, 0), (2, 0, 1)])
def test_apply_unitary_matches_kron(targets):
    gate = unitary_group.rvs(1 << len(targets), random_state=3)
    psi = random_state(4, 1)
    out = apply_unitary(psi, gate, targets)
    np.testing.assert_allclose(out.amplitudes, kron_operator(4, gate, targets) @ psi.amplitudes, atol=1e-12)


def test_real_gate_fast_path_matches_complex_path():
    psi = random_state(5, 2)
    gate = np.linalg.qr(stream(0, "o").normal(size=(4, 4)))[0]
    a = apply_unitary(psi, gate, (1, 4))
    b = apply_unitary(psi, gate.astype(complex), (1, 4))
    np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-14)


def test_controlled_gate_acts_only_on_branch():
    psi = random_state(3, 4)
    X = np.array([[0, 1], [1, 0]])
    out = apply_unitary(psi, X, (2,), controls=(0,), control_values=(0,))
    t_in, t_out = psi.tensor(), out.tensor()
    np.testing.assert_allclose(t_out[1], t_in[1])
    np.testing.assert_allclose(t_out[0], t_in[0][:, ::-1])


def test_gate_shape_and_qubit_checks():
    psi = StateVector.basis(3)
    with pytest.raises(ContractError):
        apply_unitary(psi, np.eye(2), (0, 1))
    with pytest.raises(ContractError):
        apply_unitary(psi, np.eye(4), (0, 0))
    with pytest.raises(ContractError):
        apply_unitary(psi, np.eye(2), (3,))
    with pytest.raises(ContractError):
        StateVector.basis(MAX_QUBITS + 1)


def test_oracle_is_identity_when_control_is_zero():
    oracle = PhaseOracle.from_elements([1, 2, 5], 3)
    psi = random_state(4, 5)
    zeroed = StateVector(np.where(np.arange(16) < 8, psi.amplitudes, 0), 4)
    out = apply_phase_oracle(zeroed, oracle, 0, (1, 2, 3))
    np.testing.assert_allclose(out.amplitudes, zeroed.amplitudes)


def test_full_set_oracle_is_global_sign_on_control_branch():
    oracle = PhaseOracle.from_elements(range(8), 3)
    psi = random_state(4, 6)
    out = apply_phase_oracle(psi, oracle, 0, (1, 2, 3))
    np.testing.assert_allclose(out.amplitudes[8:], -psi.amplitudes[8:])
    np.testing.assert_allclose(out.amplitudes[:8], psi.amplitudes[:8])


def test_oracle_matches_diagonal_and_is_self_inverse():
    n = 3
    members = [0, 3, 6]
    oracle = PhaseOracle.from_elements(members, n)
    psi = random_state(5, 7)
    ctrl, targets = 4, (2, 0, 1)
    diag = np.ones(16)
    for x in members:
        diag[8 + x] = -1
    expected = kron_operator(5, np.diag(diag), (ctrl,) + targets) @ psi.amplitudes
    once = apply_phase_oracle(psi, oracle, ctrl, targets)
    np.testing.assert_allclose(once.amplitudes, expected, atol=1e-12)
    twice = apply_phase_oracle(once, oracle, ctrl, targets)
    np.testing.assert_allclose(twice.amplitudes, psi.amplitudes, atol=1e-14)
    assert 3 in oracle and 4 not in oracle


def test_oracle_width_mismatch():
    with pytest.raises(ContractError):
        apply_phase_oracle(StateVector.basis(4), PhaseOracle.from_elements([1], 3), 0, (1, 2))


def test_hadamard_register_matches_gates():
    psi = random_state(4, 8)
    fast = apply_hadamard_register(psi, (3, 1))
    slow = apply_unitary(apply_unitary(psi, HADAMARD, (3,)), HADAMARD, (1,))
    np.testing.assert_allclose(fast.amplitudes, slow.amplitudes, atol=1e-13)


def test_marginal_ordering():
    state = StateVector.basis(3, 0b011)
    assert state.marginal((0,))[0] == pytest.approx(1)
    assert state.marginal((2, 0))[0b10] == pytest.approx(1)


def _program(n=2, q=1):
    wit = (3 + n,) if q else ()
    reg = (3, 4)
    return QueryProgram(3 + n + q, n, wit, (
        UnitaryStage(HADAMARD, (0,)),
        UnitaryStage(np.kron(HADAMARD, HADAMARD), reg),
        QueryStage("S", 0, reg),
        UnitaryStage(HADAMARD, (1,)),
        QueryStage("U", 1, reg),
        UnitaryStage(HADAMARD, (0,)),
    ))


def test_empty_program_returns_witness_basis_state():
    program = QueryProgram(4, 2, (2, 3))
    out = run_program(program, {}, 0b10)
    assert out.amplitudes[0b0010] == 1
    with pytest.raises(ContractError):
        program.initial_state(4)


def test_empty_s_equals_skipping_s_queries():
    program = _program()
    U = PhaseOracle.from_elements([1, 2], 2)
    with_s = run_program(program, {"S": PhaseOracle.from_elements([], 2), "U": U}, 1)
    skipped = QueryProgram(program.num_qubits, 2, program.witness_qubits,
                           tuple(s for s in program.stages if not (isinstance(s, QueryStage) and s.oracle == "S")))
    np.testing.assert_allclose(with_s.amplitudes, run_program(skipped, {"U": U}, 1).amplitudes)


def test_program_validation():
    with pytest.raises(ContractError):
        QueryProgram(5, 2, (), (QueryStage("V", 0, (1, 2)),))
    with pytest.raises(ContractError):
        QueryProgram(5, 2, (), (QueryStage("S", 0, (1, 2, 3)),))
    with pytest.raises(ContractError):
        QueryProgram(5, 2, (), (UnitaryStage(np.eye(4), (1,)),))
    assert _program().t == 1 and _program().q == 1


def test_program_round_trip():
    program = _program()
    back = parse_program(serialize_program(program))
    assert serialize_program(back) == serialize_program(program)
    oracles = {"S": PhaseOracle.from_elements([3], 2), "U": PhaseOracle.from_elements([1, 2], 2)}
    np.testing.assert_allclose(run_program(back, oracles, 1).amplitudes, run_program(program, oracles, 1).amplitudes)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), s_mask=st.integers(0, 15), u_mask=st.integers(0, 15), w=st.integers(0, 1))
def test_programs_preserve_norm(seed, s_mask, u_mask, w):
    rng = stream(seed, "prog")
    stages = []
    for _ in range(4):
        targets = tuple(rng.choice(6, size=2, replace=False).tolist())
        stages.append(UnitaryStage(unitary_group.rvs(4, random_state=rng), targets))
        stages.append(QueryStage(["S", "U"][int(rng.integers(2))], 5, (1, 2)))
    program = QueryProgram(6, 2, (0,), tuple(stages))
    oracles = {"S": PhaseOracle.from_elements([x for x in range(4) if s_mask >> x & 1], 2),
               "U": PhaseOracle.from_elements([x for x in range(4) if u_mask >> x & 1], 2)}
    assert run_program(program, oracles, w).norm() == pytest.approx(1.0, abs=1e-12)


def test_verifier_zero_when_u_empty():
    inst = Instance.manual(3, (1, 2, 5), ())
    psi = np.ones(8) / np.sqrt(8)
    assert qma_verifier_accept_prob(inst, psi) == pytest.approx(0.0, abs=1e-15)


def test_verifier_one_when_sets_full():
    inst = Instance.manual(3, tuple(range(8)), tuple(range(8)))
    psi = random_state(3, 9).amplitudes
    assert qma_verifier_accept_prob(inst, psi) == pytest.approx(1.0, abs=1e-12)


def test_verifier_state_is_normalized():
    inst = sample_strong(StrongParams(5, 6, 0.1, 0))
    assert verifier_state(inst, random_state(5, 1).amplitudes).norm() == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(10))
def test_verifier_matches_projector_form(seed):
    inst = sample_strong(StrongParams(4, 5, 0.1, seed))
    psi = random_state(4, seed).amplitudes
    assert qma_verifier_accept_prob(inst, psi) == pytest.approx(direct_accept_prob(inst, psi), abs=1e-9)


def test_verifier_reaches_alpha_with_top_witness():
    inst = sample_strong(StrongParams(6, 8, 0.1, 3))
    alpha, witness = spectral_forrelation(inst)
    assert qma_verifier_accept_prob(inst, witness) == pytest.approx(alpha, abs=1e-8)


def test_verifier_input_checks():
    inst = Instance.manual(2, (1,), (2,))
    with pytest.raises(ContractError):
        verifier_state(inst, np.ones(3) / np.sqrt(3))
    with pytest.raises(ContractError):
        verifier_state(inst, np.ones(4))


def test_repeated_verifier_is_seeded():
    inst = sample_strong(StrongParams(4, 5, 0.1, 1))
    _, psi = spectral_forrelation(inst)
    a = repeated_verifier(inst, psi, 100, stream(1, "rep"))
    b = repeated_verifier(inst, psi, 100, stream(1, "rep"))
    assert a == b and 0 <= a[1] <= 100
