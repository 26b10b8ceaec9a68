"""Polynomial families for exponential and square-root Kraus entries.

Truncated Taylor, Chebyshev, truncated Chebyshev expansion of z^s, truncated
binomial square root, the flat approximation of e^{-z} and the multivariate
AKraus approximation. All operator evaluations run on a shared position-Fock
diagonal, where the G~^2 operators act by scalars.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import product

import mpmath
import numpy as np

from .hypercube import ContractError

EXTENDED_PRECISION_NORM = 1e12
REMAINDER_TOL = 1e-13
CONDENSATE_NORM_CONSTANT = 19


class Polynomial:
    """Real polynomial in the monomial basis with exact rational coefficients when possible."""

    def __init__(self, coefficients):
        coeffs = list(coefficients)
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        self.coefficients = tuple(coeffs) if coeffs else (Fraction(0),)

    @property
    def degree(self):
        if len(self.coefficients) == 1 and self.coefficients[0] == 0:
            return -1
        return len(self.coefficients) - 1

    def coefficient_norm(self):
        return float(sum(abs(c) for c in self.coefficients))

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self.coefficients == other.coefficients

    def __hash__(self):
        return hash(self.coefficients)

    def __repr__(self):
        return f"Polynomial(degree={self.degree})"

    def __add__(self, other):
        a, b = self.coefficients, other.coefficients
        size = max(len(a), len(b))
        a = a + (0,) * (size - len(a))
        b = b + (0,) * (size - len(b))
        return Polynomial(x + y for x, y in zip(a, b))

    def __sub__(self, other):
        return self + other.scale(-1)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return self.scale(other)
        out = [0] * (len(self.coefficients) + len(other.coefficients) - 1)
        for i, a in enumerate(self.coefficients):
            if a == 0:
                continue
            for j, b in enumerate(other.coefficients):
                out[i + j] += a * b
        return Polynomial(out)

    __rmul__ = __mul__

    def scale(self, c):
        return Polynomial(c * a for a in self.coefficients)

    def substitute_scaled(self, c):
        """p(c z)."""
        return Polynomial(a * c**j for j, a in enumerate(self.coefficients))

    def __call__(self, z):
        z_arr = np.asarray(z, dtype=float)
        if self.coefficient_norm() > EXTENDED_PRECISION_NORM:
            return self._eval_extended(z_arr)
        out = np.zeros_like(z_arr)
        for c in reversed(self.coefficients):
            out = out * z_arr + float(c)
        return out if out.ndim else float(out)

    def _eval_extended(self, z_arr):
        with mpmath.workdps(60):
            coeffs = [mpmath.mpf(c.numerator) / c.denominator if isinstance(c, Fraction) else mpmath.mpf(c)
                      for c in self.coefficients]
            flat = [float(mpmath.polyval(coeffs[::-1], mpmath.mpf(float(v)))) for v in z_arr.ravel()]
        out = np.array(flat).reshape(z_arr.shape)
        return out if out.ndim else float(out)

    def apply_matrix(self, matrix):
        """Horner evaluation on a dense square matrix."""
        matrix = np.asarray(matrix)
        out = np.zeros_like(matrix, dtype=float)
        eye = np.eye(matrix.shape[0])
        for c in reversed(self.coefficients):
            out = out @ matrix + float(c) * eye
        return out


def taylor(d):
    """sum_{j<=d} z^j / j!"""
    if d < 0:
        raise ContractError("degree must be nonnegative")
    return Polynomial(Fraction(1, math.factorial(j)) for j in range(d + 1))


def cheby(k):
    if k < 0:
        raise ContractError("degree must be nonnegative")
    prev, cur = Polynomial([Fraction(1)]), Polynomial([Fraction(0), Fraction(1)])
    if k == 0:
        return prev
    z2 = Polynomial([Fraction(0), Fraction(2)])
    for _ in range(k - 1):
        prev, cur = cur, z2 * cur - prev
    return cur


def chebyshev_power_coefficient(s, k):
    """Exact a_k^{(s)} with z^s = sum_k a_k Cheby_k(z)."""
    if k > s or (s - k) % 2:
        return Fraction(0)
    a = Fraction(2 * math.comb(s, (s - k) // 2), 2**s)
    return a / 2 if k == 0 else a


def tcheby(s, d):
    if s < 0 or d < 0:
        raise ContractError("s and d must be nonnegative")
    out = Polynomial([Fraction(0)])
    for k in range(min(d, s) + 1):
        a = chebyshev_power_coefficient(s, k)
        if a:
            out = out + cheby(k).scale(a)
    return out


def binomial_half(k):
    """binom(1/2, k) as an exact fraction."""
    out = Fraction(1)
    for j in range(k):
        out *= (Fraction(1, 2) - j) / (j + 1)
    return out


def tsqrt(d):
    """Truncated binomial expansion of sqrt(1 - z/2)."""
    if d < 0:
        raise ContractError("degree must be nonnegative")
    return Polynomial(binomial_half(k) * Fraction(-1, 2) ** k for k in range(d + 1))


def log_power_chebyshev_coefficients(s, top):
    """log a_k^{(s)} for k <= top of matching parity, via the ratio (s-k)/(s+k+2)."""
    k0 = s % 2
    ks = np.arange(k0, min(top, s) + 1, 2)
    with mpmath.workdps(40):
        start = (1 - s) * mpmath.log(2) + mpmath.loggamma(s + 1) \
            - mpmath.loggamma((s - k0) / 2 + 1) - mpmath.loggamma((s + k0) / 2 + 1)
    steps = np.log(s - ks[:-1].astype(float)) - np.log(s + ks[:-1].astype(float) + 2)
    logs = float(start) + np.concatenate([[0.0], np.cumsum(steps)])
    if k0 == 0:
        logs[0] -= math.log(2)
    return ks, logs


@dataclass(frozen=True)
class FlatRegime:
    epsilon_small: bool
    dprime_at_least_10: bool
    s_at_least_3M: bool
    d_covers_coefficients: bool

    @property
    def proven(self):
        return self.epsilon_small and self.dprime_at_least_10 and self.s_at_least_3M and self.d_covers_coefficients


class FlatApproximation:
    """Flat_eps(z) = sum_{k=1}^{d'} b_k Taylor_d(-k z / w).

    Evaluated as TCheby_{w,d'}(e^{-z/w}) - b_0 in angle form. The gap to the
    literal polynomial is the Taylor tail, bounded here with a certificate.
    """

    def __init__(self, M, r, epsilon):
        if M <= 0:
            raise ContractError("M must be positive")
        if not 0 < epsilon <= 1 / math.e + 1e-15:
            raise ContractError("epsilon must lie in (0, 1/e]")
        if r < 0:
            raise ContractError("r must be nonnegative")
        self.M, self.r, self.epsilon = M, r, epsilon
        L = math.log(2 / epsilon)
        self.w = math.ceil(36 * M * M * L)
        self.d_prime = math.ceil(math.sqrt(72 * M * M * L * L))
        self.d = math.ceil(4 * ((9 * M + 1) * math.log(1 / epsilon) + math.log(2)) + r)
        ks, logs = log_power_chebyshev_coefficients(self.w, self.d_prime)
        self._ks = ks
        self._a = np.exp(logs)
        self.b0 = float(np.sum(self._a * np.cos(ks * math.pi / 2)))

    @property
    def degree(self):
        return self.d

    def degree_bound(self):
        return 100 * self.M * math.log(1 / self.epsilon) * (self.r + 1)

    def regime(self):
        s = math.sqrt(self.w / (4 * math.log(2 / self.epsilon)))
        log_bmax = math.log(self.d_prime) + self.d_prime * math.log(2.5)
        need = 4 * (math.log(2) + log_bmax + math.log(self.d_prime) + math.log(1 / self.epsilon)) + self.r
        return FlatRegime(self.epsilon <= 1 / math.e + 1e-15, self.d_prime >= 10, s >= 3 * self.M - 1e-12,
                          self.d >= need)

    def remainder_log_bound(self, zmax):
        """log of a bound on |Flat(z) - (TCheby(e^{-z/w}) - b_0)| for |z| <= zmax."""
        if zmax == 0:
            return -math.inf
        u = self.d_prime * zmax / self.w
        return (self.d_prime * math.log(1 + math.sqrt(2)) + math.log(self.d_prime)
                + (self.d + 1) * math.log(u) - math.lgamma(self.d + 2) + u)

    def __call__(self, z, chunk=4096):
        z = np.asarray(z, dtype=float)
        flat = z.ravel()
        zmax = float(np.max(np.abs(flat))) if flat.size else 0.0
        if self.remainder_log_bound(zmax) > math.log(REMAINDER_TOL):
            raise ContractError("Taylor tail not certified below tolerance for this argument range")
        # theta = arccos(e^{-z/w}) without cancellation near z = 0
        gap = -np.expm1(-flat / self.w)
        theta = 2 * np.arcsin(np.sqrt(np.clip(gap, 0.0, 2.0) / 2))
        out = np.empty_like(flat)
        step = max(1, chunk * 64 // max(len(self._ks), 1))
        for lo in range(0, flat.size, step):
            th = theta[lo:lo + step]
            out[lo:lo + step] = np.cos(np.outer(th, self._ks)) @ self._a
        out -= self.b0
        out = out.reshape(z.shape)
        return out if out.ndim else float(out)

    def to_polynomial(self):
        """Exact rational coefficients; only sensible for small w and d'."""
        if self.w > 400 or self.d > 400:
            raise ContractError("exact expansion only supported for small parameters")
        tc = tcheby(self.w, self.d_prime)
        base = taylor(self.d)
        out = Polynomial([Fraction(0)])
        for k, b in enumerate(tc.coefficients):
            if k == 0 or b == 0:
                continue
            out = out + base.substitute_scaled(Fraction(-k, self.w)).scale(b)
        return out


def flat(M, r, epsilon):
    return FlatApproximation(M, r, epsilon)


def diagonal_restricted_norm(diag, projector_matrix):
    """||Diag(diag) . P|| for a dense orthogonal projector P."""
    P = np.asarray(projector_matrix)
    gram = (P.T * np.abs(diag) ** 2) @ P
    vals = np.linalg.eigvalsh((gram + gram.T) / 2)
    return float(math.sqrt(max(vals[-1], 0.0)))


def taylor_condensate_error(w_diag, s, d, con_r):
    """||(Taylor_d(-W/s) - e^{-W/s}) Con_r|| for W diagonal in the position frame."""
    arg = -np.asarray(w_diag, dtype=float) / s
    diff = taylor(d)(arg) - np.exp(arg)
    return diagonal_restricted_norm(diff, con_r)


def condensate_predicates(W, con):
    """Check ||Con_m W Con_m|| <= M m and W Con_m = Con_{m+2} W Con_m.

    `con` maps m to the dense Con_m projector; returns the smallest M that works
    (over m >= 1) and whether the two-step mapping property holds.
    """
    W = np.asarray(W)
    ms = sorted(con)
    best = 0.0
    maps_ok = True
    for m in ms:
        if m == 0:
            continue
        P = con[m]
        best = max(best, float(np.linalg.norm(P @ W @ P, 2)) / m)
    for m in ms:
        nxt = con.get(m + 2, con[ms[-1]])
        maps_ok &= bool(np.allclose(W @ con[m], nxt @ W @ con[m], atol=1e-10))
    return best, maps_ok


def kraus_poly_coefficients(x, d2):
    """Monomial coefficients c_k^{(x)} of p_0(z) = 1 - z^2 or p_1(z) = sqrt2 z TSqrt(z^2)."""
    c = np.zeros(3 * d2 + 1)
    if x == 0:
        c[0], c[2] = 1.0, -1.0
    else:
        for k, b in enumerate(tsqrt(d2).coefficients):
            c[2 * k + 1] = math.sqrt(2) * float(b)
    return c


class AKraus:
    """Multivariate approximation of prod_i e_{x_i}(W_i) on condensates."""

    def __init__(self, epsilon, x, M=CONDENSATE_NORM_CONSTANT, r=0, kappa=0.1):
        self.x = tuple(int(b) for b in x)
        self.T = len(self.x)
        if self.T < 1:
            raise ContractError("need at least one factor")
        if not 0 < epsilon <= 1 / math.e:
            raise ContractError("epsilon must lie in (0, 1/e]")
        self.epsilon, self.M, self.r, self.kappa = epsilon, M, r, kappa
        self.d2 = math.ceil(4 + 1.5 * (math.log(self.T) + math.log(1 / epsilon)))
        self.J = 3 * self.d2 * self.T
        self.coefficients = [kraus_poly_coefficients(b, self.d2) for b in self.x]

    @cached_property
    def flat(self):
        return FlatApproximation(self.J * self.M, self.r, self.epsilon / (2 * 2**self.T))

    @property
    def degree(self):
        return self.flat.degree

    def degree_bound(self):
        return 300 * self.d2 * self.M * self.T**3 * math.log(1 / self.epsilon) * (self.r + 1)

    def __call__(self, gammas):
        """Evaluate on T commuting position-diagonal operators given by their diagonals."""
        G = np.atleast_2d(np.asarray(gammas, dtype=float))
        if G.shape[0] != self.T:
            raise ContractError(f"expected {self.T} diagonals")
        uniq, inverse = np.unique(G.T, axis=0, return_inverse=True)
        supports = [np.nonzero(c)[0] for c in self.coefficients]
        combos = np.array(list(product(*supports)), dtype=float)
        weights = np.prod([self.coefficients[i][combos[:, i].astype(int)] for i in range(self.T)], axis=0)
        args = self.kappa * (combos @ uniq.T) / 2
        values = weights @ self.flat(args)
        return values[np.asarray(inverse).ravel()]

    def target(self, gammas):
        G = np.atleast_2d(np.asarray(gammas, dtype=float))
        out = np.ones(G.shape[1])
        for b, g in zip(self.x, G):
            e = np.exp(-self.kappa * g)
            out *= (1 - e) if b == 0 else np.sqrt(e * (2 - e))
        return out
