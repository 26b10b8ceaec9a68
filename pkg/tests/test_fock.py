import math
from itertools import combinations, permutations, product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_forrelation import fock
from spectral_forrelation.hypercube import ContractError, sign_matrix


def tuples_to_list(t):
    return [m for m, c in enumerate(t) for _ in range(c)]


def permanent(A):
    n = A.shape[0]
    if n == 0:
        return 1.0
    return sum(np.prod([A[i, p[i]] for i in range(n)]) for p in permutations(range(n)))


def momentum_overlap(pos, mom, n_modes):
    """Independent oracle: <position tuple | momentum tuple> via a permanent of Hadamard entries."""
    xs, ys = tuples_to_list(pos), tuples_to_list(mom)
    H = sign_matrix(np.arange(n_modes), np.arange(n_modes)) / math.sqrt(n_modes)
    sub = H[np.ix_(xs, ys)]
    norm = math.sqrt(math.prod(math.factorial(c) for c in pos) * math.prod(math.factorial(c) for c in mom))
    return permanent(sub) / norm


@pytest.mark.parametrize("n_modes, ell", [(2, 3), (4, 2), (8, 3)])
def test_sector_size_and_order(n_modes, ell):
    basis = fock.sector_basis(n_modes, ell)
    assert basis.size == math.comb(n_modes + ell - 1, ell)
    assert all(sum(t) == ell for t in basis.states)
    keys = [t[::-1] for t in basis.states]
    assert keys == sorted(keys)


def test_truncated_basis_orders_by_total():
    basis = fock.enumerate_basis(2, n_max=3)
    totals = [sum(t) for t in basis.states]
    assert totals == sorted(totals) and basis.size == sum(math.comb(3 + k, k) for k in range(4))
    assert basis.n == 2


def test_basis_arguments():
    with pytest.raises(ContractError):
        fock.FockBasis(4)
    with pytest.raises(ContractError):
        fock.FockBasis(4, ell=2, n_max=2)


def test_basis_cap(monkeypatch):
    monkeypatch.setenv("SPECTRAL_FORRELATION_CAP", "10")
    with pytest.raises(ContractError):
        fock.FockBasis(8, ell=3)


@pytest.mark.parametrize("flavor", ["position", "momentum"])
def test_ladder_commutation(flavor):
    small = fock.sector_basis(4, 2)
    for x, y in product(range(4), repeat=2):
        a_x = fock.ladder_ops(small, x, flavor, "annihilate")
        ad_y = fock.ladder_ops(small, y, flavor, "create")
        aad = fock.ladder_ops(ad_y.codomain, x, flavor, "annihilate") @ ad_y
        ada = fock.ladder_ops(a_x.codomain, y, flavor, "create") @ a_x
        np.testing.assert_allclose(aad.toarray() - ada.toarray(), (x == y) * np.eye(small.size), atol=1e-12)


def test_creation_is_adjoint_of_annihilation():
    basis = fock.sector_basis(4, 2)
    a = fock.ladder_ops(basis, 2, "momentum", "annihilate")
    ad = fock.ladder_ops(a.codomain, 2, "momentum", "create")
    np.testing.assert_allclose(ad.toarray(), a.toarray().T, atol=1e-14)


def test_number_operator_counts_occupation():
    basis = fock.sector_basis(4, 3)
    N = fock.ladder_ops(basis, 1, kind="number").toarray()
    np.testing.assert_allclose(N, np.diag(basis.occupations[:, 1]))


def test_ladder_argument_checks():
    basis = fock.sector_basis(2, 1)
    with pytest.raises(ContractError):
        fock.ladder_ops(basis, 2)
    with pytest.raises(ContractError):
        fock.ladder_ops(basis, 0, flavor="spin")
    with pytest.raises(ContractError):
        fock.ladder_ops(basis, 0, kind="hop")
    with pytest.raises(ContractError):
        fock.ladder_ops(fock.sector_basis(2, 0), 0)


def test_operator_composition_checks_sectors():
    basis = fock.sector_basis(2, 2)
    a = fock.ladder_ops(basis, 0)
    with pytest.raises(ContractError):
        a @ a
    with pytest.raises(ContractError):
        a + fock.ladder_ops(basis, 0, kind="create")


@pytest.mark.parametrize("n_modes, ell", [(2, 2), (4, 2), (4, 3)])
def test_sector_unitary_matches_permanents(n_modes, ell):
    basis = fock.sector_basis(n_modes, ell)
    W = fock.sector_unitary(n_modes, ell)
    np.testing.assert_allclose(W.T @ W, np.eye(basis.size), atol=1e-12)
    for i, pos in enumerate(basis.states):
        for j, mom in enumerate(basis.states):
            assert W[i, j] == pytest.approx(momentum_overlap(pos, mom, n_modes), abs=1e-12)


def test_change_basis_round_trip():
    basis = fock.sector_basis(4, 3)
    v = fock.FockVector(basis, np.random.default_rng(0).normal(size=basis.size))
    back = fock.change_basis(fock.change_basis(v, "momentum"), "position")
    np.testing.assert_allclose(back.amplitudes, v.amplitudes, atol=1e-12)
    assert back.norm() == pytest.approx(v.norm())


def test_condensate_is_uniform_superposition():
    # ell bosons in the zero-momentum mode have multinomial position amplitudes
    basis = fock.sector_basis(4, 3)
    amps = fock.condensate_state(basis).amplitudes
    for t, a in zip(basis.states, amps):
        expected = math.sqrt(math.factorial(3) / math.prod(math.factorial(c) for c in t) / 4**3)
        assert a == pytest.approx(expected)


@pytest.mark.parametrize("n, ell", [(1, 1), (1, 3), (2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)])
def test_hopping_squares(n, ell):
    basis = fock.enumerate_basis(n, ell)
    for y in range(1, 1 << n):
        G = fock.hopping(basis, y).toarray()
        H = fock.hopping(basis, y, "double").toarray()
        np.testing.assert_allclose(G @ G, np.diag(fock.gamma_diagonal(basis, y)), atol=1e-9)
        np.testing.assert_allclose(G @ G, H + np.eye(basis.size), atol=1e-12)


def test_hopping_is_signed_number_sum_in_position_frame():
    # independent oracle: sum_z a~+_{z+y} a~_z = sum_x (-1)^{x.y} n_x
    basis = fock.sector_basis(8, 2)
    for y in range(8):
        signs = sign_matrix(np.arange(8), [y])[:, 0]
        expected = np.diag(basis.occupations @ signs) / math.sqrt(2)
        np.testing.assert_allclose(fock.hopping(basis, y).toarray(), expected, atol=1e-12)


def test_hopping_argument_checks():
    with pytest.raises(ContractError):
        fock.hopping(fock.sector_basis(2, 0), 1)
    with pytest.raises(ContractError):
        fock.hopping(fock.sector_basis(2, 1), 2)
    with pytest.raises(ContractError):
        fock.hopping(fock.sector_basis(2, 1), 1, "triple")
    assert not fock.hopping(fock.sector_basis(2, 1), 1, "double").matrix.nnz


def test_gamma_diagonal_matches_closed_form():
    from spectral_forrelation.hypercube import Multiset, gamma_spectrum

    basis = fock.sector_basis(8, 3)
    for i in (0, 5, 40, basis.size - 1):
        S = Multiset(tuple(tuples_to_list(basis.states[i])), 3)
        g = gamma_spectrum(S).values
        for y in range(8):
            assert fock.gamma_diagonal(basis, y)[i] == pytest.approx(g[y])


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("r", range(5))
def test_hopping_norm_on_condensates(n, r):
    basis = fock.enumerate_basis(n, 4)
    P = fock.projector(basis, "con", r).position_matrix()
    for y in range(1, 1 << n):
        G = fock.hopping(basis, y).toarray()
        H = fock.hopping(basis, y, "double").toarray()
        assert fock.operator_norm(G @ P) <= math.sqrt(r) + math.sqrt(2 + 4 * r) + 1e-9
        assert fock.operator_norm(H @ P) <= 9 * r + 9 + 1e-9
        up = fock.projector(basis, "con", min(r + 1, 4)).position_matrix()
        np.testing.assert_allclose(up @ G @ P, G @ P, atol=1e-10)


def test_projector_masks():
    basis = fock.sector_basis(4, 3)
    qec = fock.projector_mask(basis, "qec", 1, 0)
    assert np.array_equal(qec, fock.projector_mask(basis, "con", 1) & fock.projector_mask(basis, "qe", o=0))
    eq = [fock.projector_mask(basis, "qe_eq", o=o) for o in range(4)]
    assert np.array_equal(np.sum(eq, axis=0), np.ones(basis.size))
    np.testing.assert_array_equal(fock.projector_mask(basis, "qe_ge", o=2), ~fock.projector_mask(basis, "qe", o=1))
    with pytest.raises(ContractError):
        fock.projector_mask(basis, "odd")
    with pytest.raises(ContractError):
        fock.projector_mask(basis, "con", r=4)


def test_projector_matrix_is_projection():
    basis = fock.sector_basis(4, 3)
    P = fock.projector(basis, "qec", 2, 1).position_matrix()
    np.testing.assert_allclose(P @ P, P, atol=1e-12)
    np.testing.assert_allclose(P, P.T, atol=1e-12)
    assert np.trace(P) == pytest.approx(fock.projector_mask(basis, "qec", 2, 1).sum())


def test_total_momentum_and_odd_count():
    basis = fock.sector_basis(4, 3)
    i = basis.index[(0, 1, 1, 1)]
    assert fock.odd_count(basis)[i] == 3 and fock.total_momentum(basis)[i] == 1 ^ 2 ^ 3
    j = basis.index[(1, 2, 0, 0)]
    assert fock.odd_count(basis)[j] == 0 and fock.total_momentum(basis)[j] == 0


def test_success_norm_matches_dense_eigensolve():
    n, ell, v, r, o = 2, 4, 2, 2, 0
    basis = fock.enumerate_basis(n, ell)
    P = fock.projector(basis, "qec", r, o).position_matrix()
    bound = fock.success_bound(n, ell, v, r)
    for guesses in combinations(range(4), v):
        value = fock.success_norm(basis, guesses, r, o)
        dense = np.linalg.eigvalsh(P @ np.diag(fock.number_diagonal(basis, guesses)) @ P)[-1]
        assert value == pytest.approx(dense, abs=1e-9)
        assert value <= bound
        assert fock.success_norm(basis, guesses, r, o, "Pi_succ_block") <= value + 1e-12


def test_success_norm_checks_guesses():
    basis = fock.sector_basis(4, 2)
    with pytest.raises(ContractError):
        fock.success_norm(basis, (1, 1), 1, 0)
    with pytest.raises(ContractError):
        fock.success_norm(basis, (4,), 1, 0)


def naive_count(basis, r, o, d):
    keep = [t for t in basis.states if t[0] >= basis.ell - r and sum(c % 2 for c in t[1:]) <= o]
    best = 0
    for u in keep:
        best = max(best, sum(1 for w in keep if sum(abs(a - b) for a, b in zip(u, w)) == 2 * d))
    return best


@pytest.mark.parametrize("r", range(5))
@pytest.mark.parametrize("o", range(4))
def test_counting_by_enumeration(r, o):
    basis = fock.enumerate_basis(2, 4)
    for d in range(3):
        count = fock.count_qec_at_distance(basis, r, o, d)
        assert count == naive_count(basis, r, o, d)
        assert count <= fock.counting_bound(2, r, o, d)


def test_drift_bounds_hold():
    n, ell, R, kappa = 2, 4, 2, 0.1
    basis = fock.enumerate_basis(n, ell)
    for y in range(1, 4):
        for order in ("double", "squared"):
            assert fock.quasi_even_drift(basis, y, R, order) <= fock.drift_bound(R, ell) + 1e-9
        for kind in ("exp", "sqrt"):
            A = fock.condensed_query_function(basis, y, R, kappa, kind)
            for d in (1, 2):
                assert fock.odd_growth(basis, A, d) <= fock.drift_bound(R, ell, d, kind) + 1e-9


def test_condensed_functions_are_functional_calculus():
    basis = fock.enumerate_basis(2, 3)
    E = fock.condensed_query_function(basis, 1, 3, 0.2, "exp")
    Q = fock.condensed_query_function(basis, 1, 3, 0.2, "sqrt")
    np.testing.assert_allclose(Q @ Q, np.eye(basis.size) - E / 2, atol=1e-12)
    G = fock.hopping(basis, 1).toarray()
    # Con_ell is the identity, so exp is the plain matrix exponential of the diagonal G^2
    np.testing.assert_allclose(E, np.diag(np.exp(-0.2 * np.diag(G @ G))), atol=1e-12)
    with pytest.raises(ContractError):
        fock.condensed_query_function(basis, 1, 3, 0.2, "log")
    with pytest.raises(ContractError):
        fock.quasi_even_drift(basis, 1, 1, "triple")
    with pytest.raises(ContractError):
        fock.drift_bound(1, 4, 1, "cube")


def test_drift_bound_values():
    assert fock.drift_bound(2, 4) == pytest.approx(16)
    assert fock.drift_bound(2, 4, 4, "exp") == pytest.approx(32)
    assert fock.drift_bound(2, 4, 4, "sqrt") == pytest.approx(64 * 16)


def test_chain_leakage_respects_bound():
    basis = fock.enumerate_basis(2, 4)
    ops = []
    for i in range(4):
        kind = "exp" if i % 2 == 0 else "sqrt"
        ops.append(fock.condensed_query_function(basis, 1 + i % 3, 2, 0.1, kind))
    eps = fock.chain_epsilon(basis, ops, 1)
    for lam in range(3):
        assert fock.chain_leakage(basis, ops, 1, lam) <= fock.chain_bound(4, lam, eps) + 1e-9


def test_chain_leakage_identity_is_zero():
    basis = fock.enumerate_basis(2, 2)
    eye = np.eye(basis.size)
    assert fock.chain_leakage(basis, [eye, eye], 0, 0) == pytest.approx(0.0)
    assert fock.chain_epsilon(basis, [eye], 0) == pytest.approx(0.0)
    assert fock.chain_bound(3, 1, 0.5) == pytest.approx(math.comb(4, 2) * 0.25)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), ell=st.integers(1, 3))
def test_momentum_change_preserves_norm(seed, ell):
    basis = fock.sector_basis(4, ell)
    v = np.random.default_rng(seed).normal(size=basis.size)
    out = fock.change_basis(fock.FockVector(basis, v))
    assert out.norm() == pytest.approx(np.linalg.norm(v))


def test_operator_norm_handles_sparse_and_empty():
    import scipy.sparse as sp

    assert fock.operator_norm(sp.eye(3) * 2) == pytest.approx(2)
    assert fock.operator_norm(np.zeros((0, 0))) == 0.0
