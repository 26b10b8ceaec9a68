"""Bit strings over {0,1}^n, Walsh-Hadamard transforms and the gamma spectrum of a multiset."""

from collections import Counter
from dataclasses import dataclass
from itertools import combinations

import numpy as np


class ContractError(ValueError):
    """Raised when an input violates a documented precondition."""


def parity(a, b):
    """F2 inner product of two integers read as bit strings (works elementwise on arrays)."""
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.bitwise_count(np.bitwise_and(a, b)) & 1
    return (a & b).bit_count() & 1


def sign_matrix(rows, cols):
    """Matrix of (-1)^{x.y} for x in rows, y in cols."""
    rows = np.asarray(rows, dtype=np.int64)[:, None]
    cols = np.asarray(cols, dtype=np.int64)[None, :]
    return 1 - 2 * parity(rows, cols).astype(np.int8)


@dataclass(frozen=True)
class BitString:
    value: int
    n: int

    def __post_init__(self):
        if self.n < 0 or not 0 <= self.value < (1 << self.n):
            raise ContractError(f"value {self.value} does not fit in {self.n} bits")

    def _check(self, other):
        if other.n != self.n:
            raise ContractError(f"width mismatch: {self.n} vs {other.n}")

    def __xor__(self, other):
        self._check(other)
        return BitString(self.value ^ other.value, self.n)

    def dot(self, other):
        self._check(other)
        return parity(self.value, other.value)

    def bits(self):
        return format(self.value, f"0{self.n}b") if self.n else ""


@dataclass(frozen=True)
class Multiset:
    """Ordered list of n-bit strings, repetitions allowed."""

    elements: tuple
    n: int

    def __post_init__(self):
        elements = tuple(int(e) for e in self.elements)
        object.__setattr__(self, "elements", elements)
        bound = 1 << self.n
        for e in elements:
            if not 0 <= e < bound:
                raise ContractError(f"element {e} does not fit in {self.n} bits")

    @property
    def ell(self):
        return len(self.elements)

    def counts(self):
        """Multiplicity vector of length 2^n."""
        return np.bincount(np.asarray(self.elements, dtype=np.int64), minlength=1 << self.n)

    def support(self):
        """Distinct elements in increasing order."""
        return sorted(set(self.elements))

    def multiplicities(self):
        return Counter(self.elements)


def fwht(v, normalized=True, axis=-1):
    """Walsh-Hadamard transform along one axis via the in-place butterfly.

    @param v: array whose length along `axis` is a power of two
    @param normalized: scale by 2^{-n/2} so the transform is orthogonal
    @return transformed copy of v
    """
    a = np.asarray(v)
    a = np.array(a, dtype=np.result_type(a.dtype, np.float64), copy=True)
    a = np.moveaxis(a, axis, -1)
    size = a.shape[-1]
    if size < 1 or size & (size - 1):
        raise ContractError(f"length {size} is not a power of two")
    lead = a.shape[:-1]
    h = 1
    while h < size:
        blocks = a.reshape(*lead, size // (2 * h), 2, h)
        top = blocks[..., 0, :].copy()
        bottom = blocks[..., 1, :]
        blocks[..., 0, :] += bottom
        blocks[..., 1, :] = top - bottom
        h *= 2
    if normalized:
        a /= np.sqrt(size)
    return np.moveaxis(a, -1, axis)


@dataclass(frozen=True)
class GammaSpectrum:
    values: np.ndarray
    ell: int

    def __getitem__(self, y):
        return self.values[y]


def gamma_spectrum(S):
    """gamma_y = (sum_i (-1)^{y.s_i})^2 / ell for every y."""
    if S.ell < 1:
        raise ContractError("gamma spectrum of an empty multiset")
    c = fwht(S.counts().astype(np.float64), normalized=False)
    return GammaSpectrum(c * c / S.ell, S.ell)


def is_good(S, max_terms=6):
    """True iff no non-trivial XOR identity of 2, 4 or 6 elements holds.

    Two distinct k-subsets of indices with equal XOR give an identity on their
    symmetric difference, and every identity splits that way, so it suffices to
    look for collisions among the XORs of k-subsets for k = 1, 2, 3.
    Pass max_terms=4 to skip the six-term check on large multisets.
    """
    elems = S.elements
    for k in range(1, max_terms // 2 + 1):
        if k > len(elems):
            break
        seen = set()
        for combo in combinations(elems, k):
            acc = 0
            for e in combo:
                acc ^= e
            if acc in seen:
                return False
            seen.add(acc)
    return True


def sample_good(n, ell, rng, max_terms=6, patience=200, restarts=200):
    """Seeded good multiset built by greedy rejection of identity-creating draws.

    Uniform draws essentially never give a good set at n=10, ell=16, so elements
    are added one at a time; a stalled build restarts from empty.
    """
    for _ in range(restarts):
        elems = []
        stalls = 0
        while len(elems) < ell and stalls < patience:
            e = int(rng.integers(1 << n))
            if is_good(Multiset(tuple(elems + [e]), n), max_terms):
                elems.append(e)
                stalls = 0
            else:
                stalls += 1
        if len(elems) == ell:
            return Multiset(tuple(elems), n)
    raise ContractError(f"no good multiset of size {ell} found at n={n}")
