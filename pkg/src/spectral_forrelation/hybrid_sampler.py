"""Hybrid-argument samplers extracted from classical-witness query programs."""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .circuit_sim import (
    HADAMARD,
    PhaseOracle,
    QueryProgram,
    QueryStage,
    UnitaryStage,
    run_program,
    run_stages,
)
from .hypercube import ContractError, sign_matrix
from .instances import StrongParams, check_strong, sample_strong, spectral_forrelation
from .streams import stream


@dataclass
class Round:
    j: int
    measured: int
    output: int
    hit: bool
    u_padding: int


@dataclass
class SampleTranscript:
    witness: int
    v: int
    rounds: list = field(default_factory=list)

    @property
    def delta(self):
        return [r.output for r in self.rounds]

    def record(self):
        return json.dumps({
            "witness": self.witness,
            "v": self.v,
            "delta": self.delta,
            "rounds": [{"j": r.j, "measured": r.measured, "output": r.output, "hit": r.hit,
                        "u_padding": r.u_padding} for r in self.rounds],
        }, sort_keys=True)


def first_absent(delta, n):
    """Smallest n-bit string (numeric order) not in delta."""
    for x in range(1 << n):
        if x not in delta:
            return x
    raise ContractError("delta already covers every string")


def _prefix(program, j):
    slots = program.slot_positions("S")
    if not 0 <= j < len(slots):
        raise ContractError(f"slot {j} outside [0, {len(slots)})")
    cut = slots[j]
    return program.stages[:cut], program.stages[cut]


def prefix_distribution(program, oracles, witness, j):
    """Exact distribution of the j-th S-slot's target register just before that query."""
    stages, slot = _prefix(program, j)
    state = run_stages(program, oracles, program.initial_state(witness), stages)
    return state.marginal(tuple(slot.targets))


def u_padding(program, j):
    """U-queries the full program makes beyond those in the j-th prefix."""
    stages, _ = _prefix(program, j)
    used = sum(1 for s in stages if isinstance(s, QueryStage) and s.oracle == "U")
    return len(program.slot_positions("U")) - used


def _delta_oracles(oracles, delta, n):
    out = dict(oracles)
    d = PhaseOracle.from_elements(sorted(delta), n)
    out["S"] = d
    out["Delta"] = d
    return out


def sampler_round(program, U, witness, delta, rng, S=None, cache=None):
    """One Sampler round: random slot, S-queries replaced by Delta, fallback to the first string outside Delta.

    Returns the Round record; `S` only labels the hit flag. U-queries are
    padded to the program's full count with identity-acting queries, and the
    pad count is recorded.
    """
    n = program.n
    delta = frozenset(delta)
    if len(delta) >= 1 << n:
        raise ContractError("delta already covers every string")
    j = int(rng.integers(program.t))
    # no S-query precedes slot 0, so its prefix does not depend on delta
    key = (j, delta if j else frozenset(), witness)
    probs = None if cache is None else cache.get(key)
    if probs is None:
        oracles = _delta_oracles({"U": PhaseOracle.from_elements(U, n)}, delta, n)
        probs = prefix_distribution(program, oracles, witness, j)
        probs = np.clip(probs, 0.0, None)
        probs = probs / probs.sum()
        if cache is not None:
            cache[key] = probs
    x = int(rng.choice(len(probs), p=probs))
    out = first_absent(delta, n) if x in delta else x
    hit = S is not None and out in S
    return Round(j, x, out, hit, u_padding(program, j))


def cumulative_sampler(program, U, v, rng, S=None, witness=None, cache=None):
    """v Sampler rounds with a uniformly drawn witness, growing Delta by one each round."""
    if v > 1 << program.n:
        raise ContractError("v exceeds the number of strings")
    if witness is None:
        witness = int(rng.integers(1 << program.q)) if program.q else 0
    transcript = SampleTranscript(witness, v)
    delta = set()
    for _ in range(v):
        rnd = sampler_round(program, U, witness, delta, rng, S=S, cache=cache)
        transcript.rounds.append(rnd)
        delta.add(rnd.output)
    return transcript


def wilson_interval(successes, trials, level=0.99):
    ci = binomtest(successes, trials).proportion_ci(confidence_level=level, method="wilson")
    return ci.low, ci.high


def one_sided_lower(successes, trials, level=0.99):
    """Lower end of the one-sided Wilson bound at the given level."""
    low, _ = wilson_interval(successes, trials, 2 * level - 1)
    return low


def exceeds(successes, trials, p0, level=0.99):
    """One-sided test that the success rate is above p0."""
    return binomtest(successes, trials, p0, alternative="greater").pvalue < 1 - level


def consistent_with_lower_bound(successes, trials, p0, level=0.99):
    """Fail only if the rate is significantly below p0."""
    return binomtest(successes, trials, p0, alternative="less").pvalue >= 1 - level


def empirical_success(instance_source, v, trials, rng, level=0.99):
    """Fraction of trials whose v outputs all lie in S, with a Wilson interval.

    `instance_source(rng)` returns (instance, program) for one trial.
    """
    if trials < 1:
        raise ContractError("need at least one trial")
    wins = 0
    for _ in range(trials):
        inst, program = instance_source(rng)
        S = set(inst.S.elements)
        transcript = cumulative_sampler(program, inst.U, v, rng, S=S)
        wins += all(r.output in S for r in transcript.rounds)
    return wins / trials, wilson_interval(wins, trials, level)


def householder_preparation(psi):
    """Real orthogonal map sending |0> to psi."""
    psi = np.asarray(psi, dtype=float)
    u = -psi.copy()
    u[0] += 1.0
    norm2 = float(u @ u)
    if norm2 < 1e-30:
        return np.eye(len(psi))
    return np.eye(len(psi)) - 2.0 * np.outer(u, u) / norm2


@dataclass(frozen=True)
class ToyFamily:
    """Distinguishing program built from the base verifier.

    Layout: anc1, anc2, idle, query register (n), witness (q). The witness
    w_star triggers preparation of the top spectral witness; slot 0 is the
    verifier's S-query, the remaining t-1 slots are controlled by the idle
    qubit and never fire.
    """

    program: QueryProgram
    w_star: int
    psi: np.ndarray


def toy_program(inst, t, q, w_star=None):
    n = inst.n
    if t < 1 or q < 0:
        raise ContractError("need t >= 1 and q >= 0")
    if w_star is None:
        w_star = (1 << q) - 1 if q else 0
    _, witness = spectral_forrelation(inst)
    psi = np.real(witness)
    if np.sum(psi) < 0:
        psi = -psi
    psi = psi / np.linalg.norm(psi)
    anc1, anc2, idle = 0, 1, 2
    reg = tuple(range(3, 3 + n))
    wit = tuple(range(3 + n, 3 + n + q))
    hn = sign_matrix(np.arange(1 << n), np.arange(1 << n)) / math.sqrt(1 << n)
    bits = tuple(w_star >> (q - 1 - i) & 1 for i in range(q))
    stages = [
        UnitaryStage(HADAMARD, (anc1,)),
        UnitaryStage(householder_preparation(psi), reg, wit, bits),
        QueryStage("S", anc1, reg),
        UnitaryStage(hn, reg),
        UnitaryStage(HADAMARD, (anc2,)),
        QueryStage("U", anc2, reg),
        UnitaryStage(HADAMARD, (anc1,)),
        UnitaryStage(HADAMARD, (anc2,)),
    ]
    stages += [QueryStage("S", idle, reg) for _ in range(t - 1)]
    program = QueryProgram(3 + n + q, n, wit, tuple(stages))
    return ToyFamily(program, w_star, psi)


def acceptance(program, S_elements, U, witness):
    """P[both ancillas read 1] for the given oracles."""
    n = program.n
    oracles = {"S": PhaseOracle.from_elements(sorted(set(S_elements)), n), "U": PhaseOracle.from_elements(U, n)}
    state = run_program(program, oracles, witness)
    return float(state.marginal((0, 1))[3])


def distinguishing_gap(family, inst, delta):
    """acc(S, U) - acc(Delta, U) at the accepting witness."""
    acc_s = acceptance(family.program, inst.S.elements, inst.U, family.w_star)
    acc_d = acceptance(family.program, delta, inst.U, family.w_star)
    return acc_s - acc_d


def strong_toy_instances(count, seed, n=10, ell=16, kappa=0.1, v=3):
    """Strong-sampled instances filtered by check_strong, in seed order."""
    out = []
    k = 0
    while len(out) < count:
        inst = sample_strong(StrongParams(n, ell, kappa, seed * 100_003 + k))
        k += 1
        if len(set(inst.S.elements)) < ell:
            continue
        report = check_strong(inst, v, rng=stream(seed, "check", k))
        if report.is_strong:
            out.append(inst)
        if k > 1000 * count:
            raise ContractError("could not find strong instances")
    return out

