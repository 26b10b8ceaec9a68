"""Purified Strong oracle in Kraus form and its equivalence to ensemble averaging.

Register layout: the algorithm register A indexes (b, y, w) with y running over
the non-zero strings only, so 0^n is never queried. The U-record holds one
qubit per queried y in the {bottom, top} frame, allocated on first touch, and
the S register is an ell-boson sector in the position Fock basis.

Record orientation: with the record starting in bottom, the query uses
Z~ = |top><top| - |bottom><bottom|. With the opposite sign of Z~ the purified
oracle marks y with probability e^{-kappa gamma}/2 rather than
1 - e^{-kappa gamma}/2.
"""

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.stats import unitary_group

from .fock import condensate_state, gamma_diagonal, hopping, projector, sector_basis
from .hypercube import ContractError
from .streams import enumeration_cap

BOTTOM, TOP = 0, 1


def e0(gamma, kappa):
    return 1.0 - np.exp(-kappa * np.asarray(gamma, dtype=float))


def e1(gamma, kappa):
    g = np.exp(-kappa * np.asarray(gamma, dtype=float))
    return np.sqrt(g * (2.0 - g))


@dataclass(frozen=True)
class KrausPair:
    y: int
    E0: np.ndarray
    E1: np.ndarray


def kraus_pair(basis, y, kappa):
    """Position-diagonal Kraus entries for mode y on a sector basis."""
    gamma = gamma_diagonal(basis, y)
    return KrausPair(y, e0(gamma, kappa), e1(gamma, kappa))


@dataclass(frozen=True)
class Layout:
    n: int
    ell: int
    workspace: int = 1

    @property
    def n_queries(self):
        return (1 << self.n) - 1

    @property
    def dim_a(self):
        return 2 * self.n_queries * self.workspace

    def index(self, b, y, w=0):
        if not 1 <= y < (1 << self.n):
            raise ContractError("the query register never addresses y = 0^n")
        return (b * self.n_queries + (y - 1)) * self.workspace + w

    def decode(self, a):
        rest, w = divmod(a, self.workspace)
        b, yi = divmod(rest, self.n_queries)
        return b, yi + 1, w


@dataclass
class PurifiedState:
    """Amplitudes of shape (dim_A, 2, ..., 2, dim_S); one middle axis per record qubit."""

    layout: Layout
    amplitudes: np.ndarray
    record: list = field(default_factory=list)

    @property
    def basis(self):
        return sector_basis(1 << self.layout.n, self.layout.ell)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def copy(self):
        return PurifiedState(self.layout, self.amplitudes.copy(), list(self.record))

    def record_axis(self, y):
        """Axis of the record qubit for y, allocating it in |bottom> if new."""
        if y not in self.record:
            amps = self.amplitudes
            fresh = np.zeros(amps.shape[:-1] + (2,) + amps.shape[-1:], dtype=complex)
            fresh[..., BOTTOM, :] = amps
            self.amplitudes = fresh
            self.record.append(y)
        return 1 + self.record.index(y)

    def a_density(self):
        flat = self.amplitudes.reshape(self.layout.dim_a, -1)
        return flat @ flat.conj().T


def init_state(n, ell, workspace=1):
    layout = Layout(n, ell, workspace)
    basis = sector_basis(1 << n, ell)
    cap = enumeration_cap()
    if layout.dim_a * basis.size > cap:
        raise ContractError(f"state size {layout.dim_a * basis.size} exceeds cap {cap}")
    amps = np.zeros((layout.dim_a, basis.size), dtype=complex)
    amps[0] = condensate_state(basis).amplitudes
    return PurifiedState(layout, amps)


def _act(op, block):
    """Apply an S-register operator (diagonal vector or dense matrix) on the last axis."""
    if op.ndim == 1:
        return block * op
    return block @ op.T


def apply_query(state, b, y, kappa, kraus=None):
    """Apply the oracle on the A-branch (b, y, *); b = 0 is the identity.

    `kraus` optionally overrides the pair (E0, E1) acting on S, either as
    position-diagonal vectors or dense matrices.
    """
    if y == 0:
        raise ContractError("the oracle is never queried at y = 0^n")
    if b == 0:
        return state
    out = state.copy()
    axis = out.record_axis(y)
    E0, E1 = kraus if kraus is not None else astuple(kraus_pair(out.basis, y, kappa))
    lay = out.layout
    rows = [lay.index(1, y, w) for w in range(lay.workspace)]
    block = np.moveaxis(out.amplitudes[rows], axis, 1)
    bot, top = block[:, BOTTOM], block[:, TOP]
    new = np.empty_like(block)
    new[:, BOTTOM] = -_act(E0, bot) + _act(E1, top)
    new[:, TOP] = _act(E1, bot) + _act(E0, top)
    out.amplitudes[rows] = np.moveaxis(new, 1, axis)
    return out


def astuple(pair):
    return pair.E0, pair.E1


def apply_oracle(state, kappa, kraus_for=None):
    """The full controlled query: every (b=1, y) branch at once."""
    for y in range(1, 1 << state.layout.n):
        kraus = kraus_for(y) if kraus_for is not None else None
        state = apply_query(state, 1, y, kappa, kraus)
    return state


def apply_a_unitary(state, unitary):
    out = state.copy()
    out.amplitudes = np.tensordot(unitary, out.amplitudes, axes=(1, 0))
    return out


@dataclass(frozen=True)
class UQueryProgram:
    """A_T O ... O A_0 acting on the A register; T = len(unitaries) - 1."""

    layout: Layout
    unitaries: tuple

    @property
    def T(self):
        return len(self.unitaries) - 1


def random_program(n, ell, T, rng, workspace=1):
    layout = Layout(n, ell, workspace)
    mats = tuple(unitary_group.rvs(layout.dim_a, random_state=rng) for _ in range(T + 1))
    return UQueryProgram(layout, mats)


def post_query_state(program, kappa, kraus_for=None):
    lay = program.layout
    state = init_state(lay.n, lay.ell, lay.workspace)
    state = apply_a_unitary(state, program.unitaries[0])
    for unitary in program.unitaries[1:]:
        state = apply_oracle(state, kappa, kraus_for)
        state = apply_a_unitary(state, unitary)
    return state


def run_fixed_u(program, U):
    """Run the program against the classical phase oracle (-1)^{b U(y)}."""
    lay = program.layout
    phases = np.ones(lay.dim_a)
    for a in range(lay.dim_a):
        b, y, _ = lay.decode(a)
        if b and y in U:
            phases[a] = -1.0
    psi = program.unitaries[0][:, 0].copy()
    for unitary in program.unitaries[1:]:
        psi = unitary @ (phases * psi)
    return psi


def multiset_weight(counts):
    """P[S] = ell! / (2^{n ell} prod ell_x!) for an occupation tuple."""
    ell = sum(counts)
    n_modes = len(counts)
    denom = math.prod(math.factorial(c) for c in counts)
    return math.factorial(ell) / denom / n_modes**ell


def ensemble_density(program, kappa):
    """Exact E_{S,U}[rho_A] over Strong by enumerating S and U."""
    lay = program.layout
    basis = sector_basis(1 << lay.n, lay.ell)
    nonzero = list(range(1, 1 << lay.n))
    n_u = 1 << len(nonzero)
    if basis.size * n_u > enumeration_cap():
        raise ContractError("ensemble enumeration exceeds cap")
    weights = np.zeros(n_u)
    gammas = np.stack([gamma_diagonal(basis, y) for y in nonzero], axis=1)
    for counts, gamma in zip(basis.states, gammas):
        ps = multiset_weight(counts)
        p_in = 1.0 - 0.5 * np.exp(-kappa * gamma)
        for mask in range(n_u):
            pu = 1.0
            for i, p in enumerate(p_in):
                pu *= p if mask >> i & 1 else 1.0 - p
            weights[mask] += ps * pu
    rho = np.zeros((lay.dim_a, lay.dim_a), dtype=complex)
    for mask in range(n_u):
        U = {nonzero[i] for i in range(len(nonzero)) if mask >> i & 1}
        psi = run_fixed_u(program, U)
        rho += weights[mask] * np.outer(psi, psi.conj())
    return rho


def trace_norm(matrix):
    return float(np.abs(np.linalg.eigvalsh((matrix + matrix.conj().T) / 2)).sum())


def channel_equivalence_deviation(program, kappa):
    """Trace distance (unhalved) between the Kraus-channel A state and the Strong ensemble."""
    purified = post_query_state(program, kappa).a_density()
    return trace_norm(purified - ensemble_density(program, kappa))


def quasi_even_overlap(state, r, o):
    """||(id - QEC_{r,o}) psi||^2 with QEC acting on the S register."""
    Q = projector(state.basis, "qec", r, o).range_basis()
    inside = state.amplitudes @ Q
    return float(max(state.norm() ** 2 - np.linalg.norm(inside) ** 2, 0.0))


def con_overlap(state, r):
    Q = projector(state.basis, "con", r).range_basis()
    inside = state.amplitudes @ Q
    return float(max(state.norm() ** 2 - np.linalg.norm(inside) ** 2, 0.0))


def sandwiched_kraus(basis, y, kappa, R, r):
    """Con_r e_x(Con_R G~_y^2 Con_R) Con_r as dense matrices on S."""
    G = hopping(basis, y).toarray()
    con_R = projector(basis, "con", R).position_matrix()
    con_r = projector(basis, "con", r).position_matrix()
    vals, vecs = np.linalg.eigh(con_R @ G @ G @ con_R)
    vals = np.clip(vals, 0.0, None)
    out = []
    for f in (e0, e1):
        mat = (vecs * f(vals, kappa)) @ vecs.T
        out.append(con_r @ mat @ con_r)
    return tuple(out)


def sandwiched_deviation(program, kappa, R, r):
    """||psi_PQ - psi~_{R,r}|| for the condensate-sandwiched Kraus operators."""
    basis = sector_basis(1 << program.layout.n, program.layout.ell)
    cache = {}

    def kraus_for(y):
        if y not in cache:
            cache[y] = sandwiched_kraus(basis, y, kappa, R, r)
        return cache[y]

    exact = post_query_state(program, kappa)
    approx = post_query_state(program, kappa, kraus_for)
    return float(np.linalg.norm(exact.amplitudes - approx.amplitudes))


def success_probability(state, guesses, a_mask=None):
    """Weight on S tuples occupying every guessed position, optionally restricted on A."""
    occ = state.basis.occupations[:, list(guesses)]
    hit = np.all(occ >= 1, axis=1)
    amps = state.amplitudes if a_mask is None else state.amplitudes[np.asarray(a_mask)]
    return float(np.sum(np.abs(amps[..., hit]) ** 2))


def expansion_terms(program, kappa):
    """Post-query state assembled term by term over (y, b, x) sequences.

    Independent of the sequential simulation: every branch multiplies projected
    A-unitaries, record Paulis and position-diagonal Kraus products.
    """
    lay = program.layout
    basis = sector_basis(1 << lay.n, lay.ell)
    T = program.T
    nonzero = list(range(1, 1 << lay.n))
    init_s = condensate_state(basis).amplitudes
    pauli = {0: np.array([[-1.0, 0.0], [0.0, 1.0]]), 1: np.array([[0.0, 1.0], [1.0, 0.0]])}
    record = nonzero
    dim_rec = 1 << len(record)
    total = np.zeros((lay.dim_a, dim_rec, basis.size), dtype=complex)
    start_a = program.unitaries[0][:, 0]
    for ys in product(nonzero, repeat=T):
        for bs in product((0, 1), repeat=T):
            a_vec = start_a.copy()
            for i in range(T):
                proj = np.zeros(lay.dim_a)
                for w in range(lay.workspace):
                    proj[lay.index(bs[i], ys[i], w)] = 1.0
                a_vec = program.unitaries[i + 1] @ (proj * a_vec)
            if not np.any(a_vec):
                continue
            queried = [ys[i] for i in range(T) if bs[i]]
            for xs in product((0, 1), repeat=len(queried)):
                rec = np.zeros(dim_rec)
                rec[0] = 1.0
                s_vec = init_s.astype(complex)
                for y, x in zip(queried, xs):
                    rec = _apply_record(rec, pauli[x], record.index(y), len(record))
                    pair = kraus_pair(basis, y, kappa)
                    s_vec = s_vec * (pair.E0 if x == 0 else pair.E1)
                total += np.einsum("a,r,s->ars", a_vec, rec, s_vec)
    return total


def _apply_record(rec, gate, qubit, width):
    t = rec.reshape((2,) * width)
    t = np.moveaxis(np.tensordot(gate, t, axes=(1, qubit)), 0, qubit)
    return t.reshape(-1)


def dense_record_view(state):
    """Reorder a PurifiedState into (dim_A, full record over all nonzero y, dim_S)."""
    lay = state.layout
    nonzero = list(range(1, 1 << lay.n))
    amps = state.amplitudes
    for y in nonzero:
        if y not in state.record:
            amps = np.stack([amps, np.zeros_like(amps)], axis=-2)
            state = PurifiedState(lay, amps, state.record + [y])
            amps = state.amplitudes
    order = [1 + state.record.index(y) for y in nonzero]
    amps = np.transpose(amps, [0] + order + [amps.ndim - 1])
    return amps.reshape(lay.dim_a, 1 << len(nonzero), -1)
