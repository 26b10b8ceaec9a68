"""Strong-distribution sampling, spectral Forrelation and strong-yes certification."""

import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .hypercube import ContractError, Multiset, fwht, gamma_spectrum, sign_matrix
from .streams import stream

DENSE_LIMIT = 512


@dataclass(frozen=True)
class StrongParams:
    n: int
    ell: int
    kappa: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.ell < 1:
            raise ContractError("need n >= 1 and ell >= 1")
        if not 0.0 <= self.kappa <= 1.0:
            raise ContractError(f"kappa {self.kappa} outside [0, 1]")


@dataclass(frozen=True)
class Instance:
    n: int
    S: Multiset
    U: tuple
    params: StrongParams | None = None

    def __post_init__(self):
        U = tuple(sorted(int(y) for y in self.U))
        if len(set(U)) != len(U):
            raise ContractError("U has repeated elements")
        bound = 1 << self.n
        if any(not 0 <= y < bound for y in U):
            raise ContractError(f"U element outside [0, 2^{self.n})")
        if self.S.n != self.n:
            raise ContractError("S width differs from instance width")
        if self.params is not None and 0 in U:
            raise ContractError("0^n cannot be in U for strong-sampled instances")
        object.__setattr__(self, "U", U)

    @property
    def sampling(self):
        return "manual" if self.params is None else "strong"

    @classmethod
    def manual(cls, n, S, U):
        return cls(n, Multiset(tuple(S), n), tuple(U))


def inclusion_probability(gamma, kappa):
    """Probability that y joins U given gamma_y."""
    return 1.0 - 0.5 * np.exp(-kappa * np.asarray(gamma, dtype=float))


def sample_strong(params, rng=None):
    """Draw (S, U) from the Strong distribution.

    One uniform per y decides membership, so with a fixed stream raising
    kappa can only add elements to U.
    """
    if rng is None:
        rng = stream(params.seed, "strong")
    N = 1 << params.n
    S = Multiset(tuple(rng.integers(0, N, size=params.ell)), params.n)
    uniforms = rng.random(N)
    p = inclusion_probability(gamma_spectrum(S).values, params.kappa)
    members = np.nonzero(uniforms < p)[0]
    U = tuple(int(y) for y in members if y != 0)
    return Instance(params.n, S, U, params)


def state_on_support(S):
    """|S> restricted to the distinct elements: multiplicities over sqrt(ell)."""
    mult = S.multiplicities()
    support = S.support()
    return support, np.array([mult[x] for x in support], dtype=float) / math.sqrt(S.ell)


def _hadamard_block(rows, cols, n):
    return sign_matrix(rows, cols) / math.sqrt(1 << n)


def forrelation_matrix(n, support, U):
    """M^{S,U} on the given support: (1/2^n) sum_{y in U} (-1)^{(x+x').y}."""
    if len(support) == 0 or len(U) == 0:
        return np.zeros((len(support), len(support)))
    block = _hadamard_block(support, U, n)
    return block @ block.T


def _conjugated_diagonal(n, support, diag):
    """(H Diag H) restricted to support x support."""
    block = _hadamard_block(support, np.arange(1 << n), n)
    return (block * diag) @ block.T


@dataclass
class ForrelationMatrices:
    support: list
    M_SU: np.ndarray
    M_S: np.ndarray
    A_S: np.ndarray
    B_S: np.ndarray


def forrelation_matrices(inst, kappa):
    """Exact M^{S,U}, its Strong expectation M^S, and the surrogates A^S, B^S.

    The expectation uses the inclusion probability at every y including 0^n,
    matching the diagonal the sandwich bounds are stated for.
    """
    if inst.S.ell < 1:
        raise ContractError("S must be nonempty")
    n, support = inst.n, inst.S.support()
    g = gamma_spectrum(inst.S).values
    kg = kappa * g
    return ForrelationMatrices(
        support=support,
        M_SU=forrelation_matrix(n, support, inst.U),
        M_S=_conjugated_diagonal(n, support, 1.0 - 0.5 * np.exp(-kg)),
        A_S=_conjugated_diagonal(n, support, 0.5 + 0.5 * kg - 0.25 * kg * kg),
        B_S=_conjugated_diagonal(n, support, 0.5 + 0.5 * kg),
    )


def _power_iteration(matvec, size, tol=1e-10, max_iter=10_000):
    v = np.ones(size) / math.sqrt(size)
    prev = None
    for _ in range(max_iter):
        w = matvec(v)
        rq = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, v
        v = w / norm
        if prev is not None and abs(rq - prev) < tol:
            break
        prev = rq
    return float(v @ matvec(v)), v


def top_eigenpair(matrix):
    vals, vecs = np.linalg.eigh(matrix)
    return float(vals[-1]), vecs[:, -1]


def spectral_forrelation(inst):
    """alpha = ||Pi_U H Pi_S||^2 and a top witness embedded in C^{2^n}."""
    N = 1 << inst.n
    witness = np.zeros(N, dtype=complex)
    support = inst.S.support()
    if not support or not inst.U:
        return 0.0, witness
    if len(support) <= DENSE_LIMIT:
        alpha, vec = top_eigenpair(forrelation_matrix(inst.n, support, inst.U))
    else:
        idx = np.asarray(support)
        mask = np.zeros(N)
        mask[list(inst.U)] = 1.0

        def matvec(v):
            full = np.zeros(N)
            full[idx] = v
            return fwht(mask * fwht(full))[idx]

        alpha, vec = _power_iteration(matvec, len(support))
    witness[np.asarray(support)] = vec
    return max(alpha, 0.0), witness


def submatrix_norm(M, positions):
    if len(positions) == 0:
        return 0.0
    sub = M[np.ix_(positions, positions)]
    return float(np.linalg.eigvalsh(sub)[-1])


def t1t2(kappa, ell, rho, v):
    if ell < 1:
        raise ContractError("ell must be >= 1")
    t1 = (1 + kappa) / 2 + v / ell + rho
    t2 = (1 + 3 * kappa) / 2 - 15 * kappa**2 / 4 - 5 * kappa / ell - rho
    return t1, t2


def default_rho(n, ell):
    """(2 ell^2 / 2^n) ln(2^n / (2 ell^4)), clamped at 0; second value flags the clamp."""
    log_term = n * math.log(2) - math.log(2 * ell**4)
    rho = 2 * ell**2 / 2**n * log_term
    return (rho, False) if rho > 0 else (0.0, True)


def hoeffding_bound(ell, n, rho_entry):
    """Tail bound on P[max entry deviation of M^{S,U} from M^S > rho_entry]."""
    return 2 * ell**2 * math.exp(-(rho_entry**2) * 2**n / 2)


@dataclass
class ForrelationReport:
    alpha: float
    top_witness: np.ndarray
    completeness: float
    soundness_worst: float
    deltas_tested: int
    t1: float
    t2: float
    rho: float
    v: int
    kappa: float
    vacuous_regime: bool
    enumerated: bool
    worst_delta: tuple = field(default_factory=tuple)

    @property
    def is_strong(self):
        return self.alpha >= self.t2 and self.soundness_worst <= self.t1

    def record(self):
        return {
            "alpha": self.alpha,
            "completeness": self.completeness,
            "soundness_worst": self.soundness_worst,
            "deltas_tested": self.deltas_tested,
            "t1": self.t1,
            "t2": self.t2,
            "rho": self.rho,
            "v": self.v,
            "kappa": self.kappa,
            "vacuous_regime": self.vacuous_regime,
            "enumerated": self.enumerated,
            "worst_delta": list(self.worst_delta),
            "is_strong": self.is_strong,
        }


def _random_subset(rng, m, v):
    sizes = np.arange(1, v + 1)
    weights = np.array([math.comb(m, int(k)) for k in sizes], dtype=float)
    k = int(rng.choice(sizes, p=weights / weights.sum()))
    return tuple(sorted(rng.choice(m, size=k, replace=False).tolist()))


def check_strong(inst, v, delta_budget=5000, rng=None, kappa=None, rho=None):
    """Completeness, alpha and worst soundness over subsets of S of size <= v."""
    if v > inst.S.ell:
        raise ContractError("v exceeds ell")
    if kappa is None:
        kappa = inst.params.kappa if inst.params else 0.1
    if rng is None:
        rng = stream(inst.params.seed if inst.params else 0, "check_strong")
    support, s_vec = state_on_support(inst.S)
    M = forrelation_matrix(inst.n, support, inst.U)
    alpha, witness = spectral_forrelation(inst)
    completeness = float(s_vec @ M @ s_vec)
    m = len(support)
    total = sum(math.comb(m, k) for k in range(1, min(v, m) + 1))
    if total <= delta_budget:
        deltas = (c for k in range(1, min(v, m) + 1) for c in combinations(range(m), k))
        enumerated = True
    else:
        deltas = (_random_subset(rng, m, min(v, m)) for _ in range(delta_budget))
        enumerated = False
    worst, worst_delta, tested = 0.0, (), 0
    for delta in deltas:
        tested += 1
        val = submatrix_norm(M, list(delta))
        if val > worst:
            worst, worst_delta = val, tuple(support[i] for i in delta)
    if rho is None:
        rho, vacuous = default_rho(inst.n, inst.S.ell)
    else:
        vacuous = False
    t1, t2 = t1t2(kappa, inst.S.ell, rho, v)
    return ForrelationReport(alpha, witness, completeness, worst, tested, t1, t2, rho, v,
                             kappa, vacuous, enumerated, worst_delta)


class ParseError(ValueError):
    def __init__(self, message, location):
        super().__init__(f"{location}: {message}")
        self.location = location


def serialize_instance(inst):
    p = inst.params
    record = {
        "n": inst.n,
        "ell": inst.S.ell,
        "kappa": p.kappa if p else None,
        "seed": p.seed if p else None,
        "sampling": inst.sampling,
        "S": sorted(inst.S.elements),
        "U": list(inst.U),
    }
    return json.dumps(record, sort_keys=True)


def _require(record, key, kind):
    if key not in record:
        raise ParseError(f"missing field '{key}'", key)
    value = record[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ParseError(f"field '{key}' must be an integer", key)
    if kind is list and not isinstance(value, list):
        raise ParseError(f"field '{key}' must be a list", key)
    return value


def parse_instance(text):
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    if not isinstance(record, dict):
        raise ParseError("record must be an object", "top level")
    n = _require(record, "n", int)
    ell = _require(record, "ell", int)
    sampling = record.get("sampling")
    if sampling not in ("strong", "manual"):
        raise ParseError("sampling must be 'strong' or 'manual'", "sampling")
    S = _require(record, "S", list)
    U = _require(record, "U", list)
    bound = 1 << n
    for name, values in (("S", S), ("U", U)):
        for i, e in enumerate(values):
            if isinstance(e, bool) or not isinstance(e, int) or not 0 <= e < bound:
                raise ParseError(f"element {e!r} outside [0, {bound})", f"{name}[{i}]")
    if len(S) != ell:
        raise ParseError(f"S has {len(S)} elements, expected ell={ell}", "S")
    if len(set(U)) != len(U):
        raise ParseError("U has repeated elements", "U")
    params = None
    if sampling == "strong":
        if 0 in U:
            raise ParseError("0 cannot belong to U under strong sampling", f"U[{U.index(0)}]")
        kappa = record.get("kappa")
        seed = record.get("seed")
        if not isinstance(kappa, (int, float)) or isinstance(kappa, bool):
            raise ParseError("strong sampling needs a numeric kappa", "kappa")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ParseError("strong sampling needs an integer seed", "seed")
        try:
            params = StrongParams(n, ell, float(kappa), seed)
        except ContractError as exc:
            raise ParseError(str(exc), "kappa") from None
    return Instance(n, Multiset(tuple(S), n), tuple(U), params)
