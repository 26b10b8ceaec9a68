"""Dense statevector simulation of query programs with phase oracles.

Qubit 0 is the most significant bit of a basis index. Registers listed as
target tuples read their first qubit as the most significant bit of the value.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .hypercube import ContractError, fwht

MAX_QUBITS = 24
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
NORM_TOL = 1e-9


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    num_qubits: int

    @classmethod
    def basis(cls, num_qubits, index=0):
        if num_qubits > MAX_QUBITS:
            raise ContractError(f"{num_qubits} qubits exceed the cap of {MAX_QUBITS}")
        amps = np.zeros(1 << num_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps, num_qubits)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self):
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def marginal(self, qubits):
        """Outcome distribution of measuring `qubits` (first qubit most significant)."""
        probs = np.abs(self.tensor()) ** 2
        rest = tuple(q for q in range(self.num_qubits) if q not in qubits)
        probs = np.transpose(probs, tuple(qubits) + rest).reshape(1 << len(qubits), -1)
        return probs.sum(axis=1)


@dataclass(frozen=True)
class PhaseOracle:
    """(b, x) -> (-1)^{b member(x)} on an n-bit register."""

    mask: np.ndarray
    n: int

    @classmethod
    def from_elements(cls, elements, n):
        mask = np.zeros(1 << n, dtype=bool)
        elements = list(elements)
        if elements:
            mask[np.asarray(elements, dtype=np.int64)] = True
        return cls(mask, n)

    def __contains__(self, x):
        return bool(self.mask[x])


def _check_qubits(num_qubits, qubits):
    if len(set(qubits)) != len(qubits):
        raise ContractError("repeated qubit in a gate")
    if any(not 0 <= q < num_qubits for q in qubits):
        raise ContractError("qubit index outside the register")


def apply_unitary(state, matrix, targets, controls=(), control_values=()):
    """Apply a dense matrix on `targets`, conditioned on `controls` reading `control_values`."""
    targets, controls = tuple(targets), tuple(controls)
    control_values = tuple(control_values) or (1,) * len(controls)
    _check_qubits(state.num_qubits, targets + controls)
    k = len(targets)
    matrix = np.asarray(matrix)
    if matrix.shape != (1 << k, 1 << k):
        raise ContractError(f"matrix shape {matrix.shape} does not match {k} target qubits")
    t = state.tensor().copy()
    order = controls + targets + tuple(q for q in range(state.num_qubits) if q not in controls + targets)
    view = np.transpose(t, order)
    sub = view[control_values] if controls else view
    shape = sub.shape
    flat = np.ascontiguousarray(sub).reshape(1 << k, -1)
    if np.isrealobj(matrix):
        # real gate on complex amplitudes: act on the interleaved (re, im) float view
        new = (matrix @ flat.view(np.float64)).view(complex)
    else:
        new = matrix @ flat
    sub[...] = new.reshape(shape)
    return StateVector(t.reshape(-1), state.num_qubits)


def apply_phase_oracle(state, oracle, ctrl, targets):
    targets = tuple(targets)
    if len(targets) != oracle.n:
        raise ContractError(f"oracle width {oracle.n} differs from {len(targets)} target qubits")
    _check_qubits(state.num_qubits, (ctrl,) + targets)
    t = state.tensor().copy()
    order = (ctrl,) + targets + tuple(q for q in range(state.num_qubits) if q != ctrl and q not in targets)
    view = np.transpose(t, order)
    branch = view[1].reshape(1 << oracle.n, -1)
    branch *= np.where(oracle.mask, -1.0, 1.0)[:, None]
    view[1] = branch.reshape(view[1].shape)
    return StateVector(t.reshape(-1), state.num_qubits)


def apply_hadamard_register(state, targets):
    """H^{(x)k} on a register via the fast transform."""
    targets = tuple(targets)
    t = state.tensor()
    order = targets + tuple(q for q in range(state.num_qubits) if q not in targets)
    view = np.transpose(t, order).reshape(1 << len(targets), -1)
    out = fwht(view, axis=0).reshape((2,) * state.num_qubits)
    return StateVector(np.transpose(out, np.argsort(order)).reshape(-1), state.num_qubits)


@dataclass(frozen=True)
class UnitaryStage:
    matrix: np.ndarray
    targets: tuple
    controls: tuple = ()
    control_values: tuple = ()


@dataclass(frozen=True)
class QueryStage:
    oracle: str
    ctrl: int
    targets: tuple


@dataclass(frozen=True)
class QueryProgram:
    num_qubits: int
    n: int
    witness_qubits: tuple
    stages: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.num_qubits > MAX_QUBITS:
            raise ContractError(f"{self.num_qubits} qubits exceed the cap of {MAX_QUBITS}")
        for stage in self.stages:
            if isinstance(stage, QueryStage):
                if stage.oracle not in ("S", "U", "Delta"):
                    raise ContractError(f"unknown oracle {stage.oracle!r}")
                if len(stage.targets) != self.n:
                    raise ContractError("query register width differs from n")
                _check_qubits(self.num_qubits, (stage.ctrl,) + tuple(stage.targets))
            else:
                k = len(stage.targets)
                if np.asarray(stage.matrix).shape != (1 << k, 1 << k):
                    raise ContractError("stage unitary does not match its target qubits")
                _check_qubits(self.num_qubits, tuple(stage.targets) + tuple(stage.controls))

    @property
    def q(self):
        return len(self.witness_qubits)

    def slot_positions(self, oracle="S"):
        return [i for i, s in enumerate(self.stages) if isinstance(s, QueryStage) and s.oracle == oracle]

    @property
    def t(self):
        return len(self.slot_positions("S"))

    def initial_state(self, witness):
        if not 0 <= witness < (1 << self.q):
            raise ContractError(f"witness {witness} does not fit in {self.q} bits")
        index = 0
        for i, qubit in enumerate(self.witness_qubits):
            if witness >> (self.q - 1 - i) & 1:
                index |= 1 << (self.num_qubits - 1 - qubit)
        return StateVector.basis(self.num_qubits, index)


def run_stages(program, oracles, state, stages):
    for stage in stages:
        if isinstance(stage, QueryStage):
            state = apply_phase_oracle(state, oracles[stage.oracle], stage.ctrl, stage.targets)
        else:
            state = apply_unitary(state, stage.matrix, stage.targets, stage.controls, stage.control_values)
    return state


def run_program(program, oracles, witness):
    """Pre-measurement state of the program on |w, 0...0>.

    `oracles` maps "S", "U" and optionally "Delta" to PhaseOracle values.
    """
    return run_stages(program, oracles, program.initial_state(witness), program.stages)


def _encode_matrix(m):
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def serialize_program(program):
    stages = []
    for s in program.stages:
        if isinstance(s, QueryStage):
            stages.append({"query": s.oracle, "ctrl": s.ctrl, "targets": list(s.targets)})
        else:
            stages.append({"unitary": _encode_matrix(s.matrix), "targets": list(s.targets),
                           "controls": list(s.controls), "control_values": list(s.control_values)})
    return json.dumps({"num_qubits": program.num_qubits, "n": program.n,
                       "witness_qubits": list(program.witness_qubits), "stages": stages}, sort_keys=True)


def parse_program(text):
    record = json.loads(text)
    stages = []
    for s in record["stages"]:
        if "query" in s:
            stages.append(QueryStage(s["query"], s["ctrl"], tuple(s["targets"])))
        else:
            m = np.asarray(s["unitary"]["re"]) + 1j * np.asarray(s["unitary"]["im"])
            stages.append(UnitaryStage(m, tuple(s["targets"]), tuple(s.get("controls", ())),
                                       tuple(s.get("control_values", ()))))
    return QueryProgram(record["num_qubits"], record["n"], tuple(record["witness_qubits"]), tuple(stages))


def verifier_state(inst, witness):
    """Two-ancilla verifier on qubits (anc1, anc2, witness register)."""
    n = inst.n
    psi = np.asarray(witness, dtype=complex)
    if psi.shape != (1 << n,):
        raise ContractError("witness length must be 2^n")
    if abs(np.linalg.norm(psi) - 1.0) > NORM_TOL:
        raise ContractError("witness must be normalized")
    if n + 2 > MAX_QUBITS:
        raise ContractError("instance too wide for the simulator")
    amps = np.zeros(4 << n, dtype=complex)
    amps[: 1 << n] = psi
    state = StateVector(amps, n + 2)
    reg = tuple(range(2, n + 2))
    S = PhaseOracle.from_elements(inst.S.support(), n)
    U = PhaseOracle.from_elements(inst.U, n)
    state = apply_unitary(state, HADAMARD, (0,))
    state = apply_phase_oracle(state, S, 0, reg)
    state = apply_hadamard_register(state, reg)
    state = apply_unitary(state, HADAMARD, (1,))
    state = apply_phase_oracle(state, U, 1, reg)
    state = apply_unitary(state, HADAMARD, (0,))
    state = apply_unitary(state, HADAMARD, (1,))
    return state


def qma_verifier_accept_prob(inst, witness):
    """P[both ancillas read 1] for the base verifier."""
    return float(verifier_state(inst, witness).marginal((0, 1))[3])


def direct_accept_prob(inst, witness):
    """||Pi_U H Pi_S psi||^2 computed without the circuit."""
    psi = np.asarray(witness, dtype=complex)
    mask_s = np.zeros(1 << inst.n, dtype=bool)
    mask_s[inst.S.support()] = True
    v = fwht(np.where(mask_s, psi, 0))
    return float(np.sum(np.abs(v[list(inst.U)]) ** 2)) if inst.U else 0.0


def repeated_verifier(inst, witness, shots, rng):
    """Independent repetitions of the base verifier; returns per-shot probability and accept count."""
    p = qma_verifier_accept_prob(inst, witness)
    return p, int(rng.binomial(shots, p))
