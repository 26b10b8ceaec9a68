"""Fixed-sector bosonic Fock algebra over 2^n modes in position and momentum frames."""

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
import scipy.sparse as sp

from .hypercube import ContractError, sign_matrix
from .streams import enumeration_cap


def _sector_tuples(n_modes, ell):
    out = []
    for combo in combinations_with_replacement(range(n_modes), ell):
        counts = [0] * n_modes
        for m in combo:
            counts[m] += 1
        out.append(tuple(counts))
    out.sort(key=lambda t: t[::-1])
    return out


class FockBasis:
    """Canonically ordered occupation tuples.

    A sector basis holds every tuple with exactly `ell` bosons; a truncated
    basis holds all totals 0..n_max, ordered by total and then colex.
    """

    def __init__(self, n_modes, ell=None, n_max=None):
        if (ell is None) == (n_max is None):
            raise ContractError("give exactly one of ell or n_max")
        top = ell if ell is not None else n_max
        if top < 0 or n_modes < 1:
            raise ContractError("need n_modes >= 1 and a nonnegative boson count")
        lows = [ell] if ell is not None else range(n_max + 1)
        size = sum(math.comb(n_modes + k - 1, k) for k in lows)
        cap = enumeration_cap()
        if size > cap:
            raise ContractError(f"basis size {size} exceeds cap {cap}")
        self.n_modes = n_modes
        self.ell = ell
        self.n_max = n_max
        self.states = [t for k in lows for t in _sector_tuples(n_modes, k)]
        self.index = {t: i for i, t in enumerate(self.states)}
        self.occupations = np.array(self.states, dtype=np.int64).reshape(len(self.states), n_modes)

    @property
    def size(self):
        return len(self.states)

    @property
    def n(self):
        return self.n_modes.bit_length() - 1

    def __len__(self):
        return self.size

    def __repr__(self):
        kind = f"ell={self.ell}" if self.ell is not None else f"n_max={self.n_max}"
        return f"FockBasis(n_modes={self.n_modes}, {kind}, size={self.size})"


@lru_cache(maxsize=None)
def sector_basis(n_modes, ell):
    return FockBasis(n_modes, ell=ell)


def enumerate_basis(n, ell=None, n_max=None):
    return FockBasis(1 << n, ell=ell, n_max=n_max) if n_max is not None else sector_basis(1 << n, ell)


@dataclass(frozen=True)
class FockVector:
    basis: FockBasis
    amplitudes: np.ndarray

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class ModeOperator:
    matrix: sp.csr_matrix
    domain: FockBasis
    codomain: FockBasis
    tag: str = "custom"

    def __matmul__(self, other):
        if isinstance(other, ModeOperator):
            if other.codomain is not self.domain:
                raise ContractError("operator sectors do not compose")
            return ModeOperator((self.matrix @ other.matrix).tocsr(), other.domain, self.codomain)
        if isinstance(other, FockVector):
            return FockVector(self.codomain, self.matrix @ other.amplitudes)
        return self.matrix @ other

    def __add__(self, other):
        if other.domain is not self.domain or other.codomain is not self.codomain:
            raise ContractError("operator sectors do not match")
        return ModeOperator((self.matrix + other.matrix).tocsr(), self.domain, self.codomain)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, c):
        return ModeOperator((self.matrix * c).tocsr(), self.domain, self.codomain, self.tag)

    def adjoint(self):
        return ModeOperator(self.matrix.conj().T.tocsr(), self.codomain, self.domain, self.tag)

    def toarray(self):
        return self.matrix.toarray()


def _target_basis(basis, shift):
    if basis.ell is None:
        return basis
    if basis.ell + shift < 0:
        raise ContractError("annihilation below the vacuum sector")
    return sector_basis(basis.n_modes, basis.ell + shift)


def _position_ladder(basis, x, create):
    target = _target_basis(basis, 1 if create else -1)
    rows, cols, vals = [], [], []
    for j, t in enumerate(basis.states):
        count = t[x]
        if not create and count == 0:
            continue
        new = list(t)
        new[x] += 1 if create else -1
        i = target.index.get(tuple(new))
        if i is None:
            continue
        rows.append(i)
        cols.append(j)
        vals.append(math.sqrt(count + 1) if create else math.sqrt(count))
    m = sp.csr_matrix((vals, (rows, cols)), shape=(target.size, basis.size))
    return ModeOperator(m, basis, target, "creation" if create else "annihilation")


def _momentum_ladder(basis, y, create):
    signs = sign_matrix(np.arange(basis.n_modes), [y])[:, 0] / math.sqrt(basis.n_modes)
    ops = [_position_ladder(basis, x, create) for x in range(basis.n_modes)]
    total = sum(op.matrix * signs[x] for x, op in enumerate(ops))
    return ModeOperator(total.tocsr(), basis, ops[0].codomain, ops[0].tag)


def ladder_ops(basis, x, flavor="position", kind="annihilate"):
    """Creation, annihilation or number operator on mode x in the chosen frame."""
    if not 0 <= x < basis.n_modes:
        raise ContractError(f"mode {x} outside [0, {basis.n_modes})")
    if flavor not in ("position", "momentum"):
        raise ContractError(f"unknown flavor {flavor!r}")
    build = _position_ladder if flavor == "position" else _momentum_ladder
    if kind == "create":
        return build(basis, x, True)
    if kind == "annihilate":
        return build(basis, x, False)
    if kind == "number":
        if basis.ell == 0:
            return ModeOperator(sp.csr_matrix((1, 1)), basis, basis, "number")
        down = build(basis, x, False)
        up = build(down.codomain, x, True) if basis.ell is not None else build(basis, x, True)
        op = up @ down
        return ModeOperator(op.matrix, basis, basis, "number")
    raise ContractError(f"unknown kind {kind!r}")


def _hop_sum(basis, y):
    """sum_x a~^dag_{x+y} a~_x on a sector (unnormalized)."""
    down = [ladder_ops(basis, x, "momentum", "annihilate") for x in range(basis.n_modes)]
    lower = down[0].codomain
    total = None
    for x in range(basis.n_modes):
        up = ladder_ops(lower, x ^ y, "momentum", "create")
        term = up.matrix @ down[x].matrix
        total = term if total is None else total + term
    return total.tocsr()


def hopping(basis, y, order="single"):
    """Normalized momentum hopping operators G~_y (single) and H~_y (double)."""
    if basis.ell is None or basis.ell < 1:
        raise ContractError("hopping needs a sector basis with ell >= 1")
    if not 0 <= y < basis.n_modes:
        raise ContractError(f"mode {y} outside [0, {basis.n_modes})")
    ell = basis.ell
    if order == "single":
        return ModeOperator(_hop_sum(basis, y) / math.sqrt(ell), basis, basis, "hopping")
    if order != "double":
        raise ContractError(f"unknown order {order!r}")
    if ell < 2:
        return ModeOperator(sp.csr_matrix((basis.size, basis.size)), basis, basis, "hopping")
    # annihilators commute, so the pair sum factors through one hop on ell-1 bosons
    lower = sector_basis(basis.n_modes, ell - 1)
    inner = _hop_sum(lower, y)
    total = None
    for x in range(basis.n_modes):
        down = ladder_ops(basis, x, "momentum", "annihilate").matrix
        up = ladder_ops(lower, x ^ y, "momentum", "create").matrix
        term = up @ inner @ down
        total = term if total is None else total + term
    return ModeOperator((total / ell).tocsr(), basis, basis, "hopping")


def gamma_diagonal(basis, y):
    """gamma_y of the multiset encoded by each position tuple (closed form, used as an oracle)."""
    signs = sign_matrix(np.arange(basis.n_modes), [y])[:, 0]
    c = basis.occupations @ signs
    return c.astype(float) ** 2 / basis.ell


@lru_cache(maxsize=None)
def sector_unitary(n_modes, ell):
    """Real orthogonal W with column u = position amplitudes of the momentum tuple u."""
    W = np.ones((1, 1))
    for k in range(ell):
        here, nxt = sector_basis(n_modes, k), sector_basis(n_modes, k + 1)
        creators = [ladder_ops(here, y, "momentum", "create").matrix for y in range(n_modes)]
        images = [c @ W for c in creators]
        W_next = np.zeros((nxt.size, nxt.size))
        for j, u in enumerate(nxt.states):
            y = next(m for m, c in enumerate(u) if c)
            prev = list(u)
            prev[y] -= 1
            W_next[:, j] = images[y][:, here.index[tuple(prev)]] / math.sqrt(u[y])
        W = W_next
    W.setflags(write=False)
    return W


def change_basis(vector, to="momentum"):
    W = sector_unitary(vector.basis.n_modes, vector.basis.ell)
    amps = W.T @ vector.amplitudes if to == "momentum" else W @ vector.amplitudes
    return FockVector(vector.basis, amps)


def condensate_state(basis):
    """All ell bosons in the zero-momentum mode, in position amplitudes."""
    W = sector_unitary(basis.n_modes, basis.ell)
    start = basis.index[(basis.ell,) + (0,) * (basis.n_modes - 1)]
    return FockVector(basis, W[:, start].copy())


def odd_count(basis):
    """Number of non-zero momentum modes with odd occupation, per tuple."""
    return (basis.occupations[:, 1:] % 2).sum(axis=1)


def total_momentum(basis):
    """XOR of momentum labels carrying an odd number of bosons, per tuple."""
    odd = basis.occupations % 2
    labels = np.arange(basis.n_modes)
    return np.bitwise_xor.reduce(np.where(odd == 1, labels, 0), axis=1)


PROJECTOR_KINDS = ("con", "qe", "qe_eq", "qe_ge", "qec")
ROUNDOFF_FLOOR = 1e-12


def projector_mask(basis, kind, r=None, o=None):
    """Boolean mask over momentum tuples selecting the projector's range."""
    if kind not in PROJECTOR_KINDS:
        raise ContractError(f"unknown projector kind {kind!r}")
    if r is not None and not 0 <= r <= basis.ell:
        raise ContractError(f"r={r} outside [0, {basis.ell}]")
    if o is not None and not 0 <= o <= basis.n_modes:
        raise ContractError(f"o={o} outside [0, {basis.n_modes}]")
    ones = np.ones(basis.size, dtype=bool)
    con = basis.occupations[:, 0] >= basis.ell - r if r is not None else ones
    odd = odd_count(basis)
    if kind == "con":
        return con
    if kind == "qe":
        return odd <= o
    if kind == "qe_eq":
        return odd == o
    if kind == "qe_ge":
        return odd >= o
    return con & (odd <= o)


@dataclass(frozen=True)
class Projector:
    basis: FockBasis
    kind: str
    mask: np.ndarray

    def position_matrix(self):
        W = sector_unitary(self.basis.n_modes, self.basis.ell)
        return (W * self.mask) @ W.T

    def range_basis(self):
        """Orthonormal position-frame columns spanning the projector's range."""
        return sector_unitary(self.basis.n_modes, self.basis.ell)[:, self.mask]


def projector(basis, kind, r=None, o=None):
    return Projector(basis, kind, projector_mask(basis, kind, r, o))


def number_diagonal(basis, guesses):
    """Diagonal of n_{z1}...n_{zv} in the position frame."""
    return np.prod(basis.occupations[:, list(guesses)], axis=1).astype(float)


@dataclass(frozen=True)
class SuccessOperator:
    guesses: tuple
    realization: str

    def diagonal(self, basis):
        occ = basis.occupations[:, list(self.guesses)]
        if self.realization == "Pi_succ_block":
            return np.all(occ >= 1, axis=1).astype(float)
        return np.prod(occ, axis=1).astype(float)


def _check_guesses(basis, guesses):
    if len(set(guesses)) != len(guesses):
        raise ContractError("guesses must be distinct")
    if any(not 0 <= z < basis.n_modes for z in guesses):
        raise ContractError("guess outside the mode range")


def success_norm(basis, guesses, r, o, realization="Lambda_block"):
    """||QEC_{r,o} . S . QEC_{r,o}|| for the chosen success operator S."""
    _check_guesses(basis, guesses)
    Q = projector(basis, "qec", r, o).range_basis()
    if Q.shape[1] == 0:
        return 0.0
    diag = SuccessOperator(tuple(guesses), realization).diagonal(basis)
    return float(np.linalg.eigvalsh((Q.T * diag) @ Q)[-1])


def success_bound(n, ell, v, r):
    return 2 * (4 * v * (r**3 + v * r**2) * math.sqrt(ell) / 2 ** (n / 4)) ** v


def count_qec_at_distance(basis, r, o, d):
    """Max over QEC tuples u of the number of QEC tuples w with |u - w|_1 = 2d."""
    mask = projector_mask(basis, "qec", r, o)
    occ = basis.occupations[mask]
    if len(occ) == 0:
        return 0
    dist = np.abs(occ[:, None, :] - occ[None, :, :]).sum(axis=2)
    return int((dist == 2 * d).sum(axis=1).max())


def counting_bound(n, r, o, d):
    e = d / 2 + o
    return (2 ** (n + 1)) ** e * (r + e) ** e


def operator_norm(matrix):
    """Largest singular value of a dense or sparse matrix."""
    dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
    if dense.size == 0:
        return 0.0
    return float(np.linalg.norm(dense, 2))


def _position_projector(basis, kind, r=None, o=None):
    return projector(basis, kind, r, o).position_matrix()


def quasi_even_drift(basis, y, R, order="double"):
    """||sum_{o<=R} (id - QE_{=o}) X QEC_{(R,=o)}|| for X = H~_y ("double") or G~_y^2 ("squared")."""
    if order == "double":
        X = hopping(basis, y, "double").toarray()
    elif order == "squared":
        G = hopping(basis, y).toarray()
        X = G @ G
    else:
        raise ContractError(f"unknown order {order!r}")
    eye = np.eye(basis.size)
    con = _position_projector(basis, "con", r=R)
    total = np.zeros_like(eye)
    for o in range(min(R, basis.n_modes) + 1):
        eq = _position_projector(basis, "qe_eq", o=o)
        total += (eye - eq) @ X @ con @ eq
    return operator_norm(total)


def condensed_query_function(basis, y, R, kappa, kind="exp"):
    """exp(-k C G~^2 C) ("exp") or sqrt(1 - exp(-k C G~^2 C)/2) ("sqrt"), C = Con_R, as a dense matrix."""
    G = hopping(basis, y).toarray()
    con = _position_projector(basis, "con", r=R)
    vals, vecs = np.linalg.eigh(con @ G @ G @ con)
    if kind == "exp":
        f = np.exp(-kappa * vals)
    elif kind == "sqrt":
        f = np.sqrt(1.0 - 0.5 * np.exp(-kappa * vals))
    else:
        raise ContractError(f"unknown kind {kind!r}")
    return (vecs * f) @ vecs.T


def odd_growth(basis, A, d):
    """||sum_o QE_{>=o+d} A QE_{o}|| over every o with o + d within the mode count."""
    total = np.zeros((basis.size, basis.size))
    for o in range(basis.n_modes - d + 1):
        total += _position_projector(basis, "qe_ge", o=o + d) @ A @ _position_projector(basis, "qe", o=o)
    return operator_norm(total)


def drift_bound(R, ell, d=None, kind="hopping"):
    base = R**5 / math.sqrt(ell)
    if kind == "hopping":
        return base
    if kind == "exp":
        return (2 * base) ** (d / 4)
    if kind == "sqrt":
        return (64 * base) ** (d / 4)
    raise ContractError(f"unknown kind {kind!r}")


def chain_leakage(basis, operators, o, lam):
    """||(id - QE_{o+lam}) A_t ... A_1 QE_o|| for operators listed as A_1, ..., A_t."""
    eye = np.eye(basis.size)
    product = _position_projector(basis, "qe", o=o)
    for A in operators:
        product = A @ product
    top = min(o + lam, basis.n_modes)
    return operator_norm((eye - _position_projector(basis, "qe", o=top)) @ product)


def chain_epsilon(basis, operators, o):
    """Smallest eps with ||(id - QE_{o+a+b}) A QE_{o+a}|| <= eps^(b+1) for every A, a, b."""
    eye = np.eye(basis.size)
    eps = 0.0
    top = basis.n_modes
    for A in operators:
        for a in range(top - o + 1):
            inner = _position_projector(basis, "qe", o=o + a)
            for b in range(top - o - a + 1):
                outer = eye - _position_projector(basis, "qe", o=o + a + b)
                leak = operator_norm(outer @ A @ inner)
                # round-off leakage would otherwise dominate after the (b+1)-th root
                if leak > ROUNDOFF_FLOOR:
                    eps = max(eps, leak ** (1.0 / (b + 1)))
    return eps


def chain_bound(t, lam, eps):
    return math.comb(t + lam, t - 1) * eps ** (lam + 1)
