"""Counterfeiting strategies and multi-verifier attack experiments.

Pair-cloning strategies map one qubit to two (a CPTP map into two registers);
the resulting counterfeits share a :class:`~qtokens.qticket.CorrelatedPair`
so joint verification statistics come out of the actual post-cloning states.
The sequential drivers stage a single holder against several verifiers who
check the same serial but cannot coordinate; the figure of merit is how
often at least two of them accept.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .bounds import BoundReport, learning_bound
from .core import (I2, LABELS, PAULI_X, PAULI_Z, PROJECTOR_STACK, StateLabel,
                   partial_trace, projector_of)
from .cv import ChallengeQuestion, CvToken, honest_answer
from .qticket import (CorrelatedPair, QticketSecret, TokenInstance,
                      VerificationOutcome, VerifierPolicy, token_from_secret,
                      verify)
from .rational import threshold_count


class PairOutcomeDist(NamedTuple):
    """Joint verification outcome for one cloned position: first index is
    the copy handed to the first verifier."""

    p11: float
    p10: float
    p01: float
    p00: float

    @property
    def first_marginal(self) -> float:
        return self.p11 + self.p10

    @property
    def second_marginal(self) -> float:
        return self.p11 + self.p01


@dataclass(frozen=True)
class PairCloneStrategy:
    """One-qubit to two-qubit map given by a callable on density matrices.

    ``map_stack`` optionally vectorizes the same map over an (N, 2, 2)
    stack; without it apply_stack falls back to a per-state loop.
    """

    name: str
    map: Callable[[np.ndarray], np.ndarray]
    map_stack: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return self.map(np.asarray(rho, dtype=complex))

    def apply_stack(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=complex)
        if self.map_stack is not None:
            return self.map_stack(states)
        return np.stack([self.map(rho) for rho in states])


def _universal_clone(rho: np.ndarray) -> np.ndarray:
    rr = np.kron(rho, rho)
    ri = np.kron(rho, I2)
    ir = np.kron(I2, rho)
    return rr / 3.0 + (ri + ir) / 6.0


def _universal_clone_stack(states: np.ndarray) -> np.ndarray:
    eye = np.broadcast_to(I2, states.shape)
    rr = np.einsum("nab,ncd->nacbd", states, states).reshape(-1, 4, 4)
    ri = np.einsum("nab,ncd->nacbd", states, eye).reshape(-1, 4, 4)
    ir = np.einsum("nab,ncd->nacbd", eye, states).reshape(-1, 4, 4)
    return rr / 3.0 + (ri + ir) / 6.0


_Z0 = np.diag([1.0, 0.0]).astype(complex)
_Z1 = np.diag([0.0, 1.0]).astype(complex)


def _measure_reprepare_z(rho: np.ndarray) -> np.ndarray:
    p0 = float(rho[0, 0].real)
    p1 = float(rho[1, 1].real)
    return p0 * np.kron(_Z0, _Z0) + p1 * np.kron(_Z1, _Z1)


def _measure_reprepare_z_stack(states: np.ndarray) -> np.ndarray:
    p0 = states[:, 0, 0].real[:, None, None]
    p1 = states[:, 1, 1].real[:, None, None]
    return p0 * np.kron(_Z0, _Z0) + p1 * np.kron(_Z1, _Z1)


def _intermediate_projector() -> np.ndarray:
    """Rank-one projector onto the +1 eigenvector of (X + Z)/sqrt(2)."""
    ham = (PAULI_X + PAULI_Z) / math.sqrt(2.0)
    eigvals, eigvecs = np.linalg.eigh(ham)
    v = eigvecs[:, np.argmax(eigvals)]
    return np.outer(v, v.conj())


def _intermediate_reprepare(rho: np.ndarray) -> np.ndarray:
    proj = _intermediate_projector()
    orth = I2 - proj
    p_plus = float(np.trace(proj @ rho).real)
    return p_plus * np.kron(proj, proj) + (1.0 - p_plus) * np.kron(orth, orth)


def _intermediate_reprepare_stack(states: np.ndarray) -> np.ndarray:
    proj = _intermediate_projector()
    orth = I2 - proj
    p_plus = np.einsum("ij,nji->n", proj, states).real[:, None, None]
    return p_plus * np.kron(proj, proj) + (1.0 - p_plus) * np.kron(orth, orth)


UNIVERSAL_CLONER = PairCloneStrategy(
    "universal-cloner", _universal_clone, _universal_clone_stack)
MEASURE_REPREPARE_Z = PairCloneStrategy(
    "measure-reprepare-z", _measure_reprepare_z, _measure_reprepare_z_stack)
INTERMEDIATE_BASIS = PairCloneStrategy(
    "intermediate-basis", _intermediate_reprepare, _intermediate_reprepare_stack)

PAIR_STRATEGIES: dict[str, PairCloneStrategy] = {
    s.name: s for s in (UNIVERSAL_CLONER, MEASURE_REPREPARE_Z, INTERMEDIATE_BASIS)
}


def universal_cloner() -> PairCloneStrategy:
    """Symmetric one-to-two cloning map
    rho -> rho (x) rho / 3 + (rho (x) 1 + 1 (x) rho) / 6."""
    return UNIVERSAL_CLONER


def measure_reprepare_z() -> PairCloneStrategy:
    """Measure in the Z basis and emit two copies of the outcome projector."""
    return MEASURE_REPREPARE_Z


def pair_outcome_distribution(strategy: PairCloneStrategy,
                              label: StateLabel) -> PairOutcomeDist:
    """Exact four-way outcome distribution when both halves of a cloned
    qubit prepared in ``label`` are verified against that label."""
    p = projector_of(label)
    q = I2 - p
    out = strategy(p)
    vals = [float(np.trace(np.kron(a, b) @ out).real)
            for a, b in ((p, p), (p, q), (q, p), (q, q))]
    total = sum(vals)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"strategy {strategy.name} is not trace preserving")
    return PairOutcomeDist(*vals)


def mixture_outcome_distribution(strategy: PairCloneStrategy) -> PairOutcomeDist:
    """Label-averaged outcome distribution: labels are drawn uniformly and
    positions are independent, so per-position outcomes are iid with this
    mixture law even for label-sensitive strategies."""
    dists = np.array([pair_outcome_distribution(strategy, lab) for lab in LABELS])
    return PairOutcomeDist(*(float(x) for x in dists.mean(axis=0)))


def counterfeit(token: TokenInstance, strategy: PairCloneStrategy,
                rng: np.random.Generator | None = None
                ) -> tuple[TokenInstance, TokenInstance]:
    """Consume a token and emit two correlated counterfeits with its serial.

    The per-position post-cloning 4x4 states are kept on a shared
    CorrelatedPair; the joint four-outcome measurement is sampled once, at
    first verification, drawing from ``rng`` when one is supplied here.
    """
    if token.consumed:
        raise ValueError("token already consumed")
    if token.qubits is None:
        raise ValueError("can only clone a token with definite qubit states")
    token.consumed = True
    pair = CorrelatedPair(strategy.apply_stack(token.qubits), rng=rng)
    first = TokenInstance(token.serial, None, pair=pair, side=0)
    second = TokenInstance(token.serial, None, pair=pair, side=1)
    return first, second


def double_accept_mc(n_qubits: int, f_tol, dist: PairOutcomeDist, trials: int,
                     rng: np.random.Generator, batch: int = 50_000) -> int:
    """Count trials where both cloned halves reach the acceptance threshold,
    sampling per-position outcomes iid from ``dist``."""
    k_min = threshold_count(f_tol, n_qubits)
    pvals = np.asarray(dist, dtype=float)
    hits = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        counts = rng.multinomial(n_qubits, pvals, size=b)
        first = counts[:, 0] + counts[:, 1]
        second = counts[:, 0] + counts[:, 2]
        hits += int(((first >= k_min) & (second >= k_min)).sum())
        done += b
    return hits


# ---------------------------------------------------------------------------
# Sequential multi-verifier attacks, object level.
#
# A driver is handed the single genuine token once, then must produce one
# submission per verification round, seeing only the boolean accept history.
# Every submission is consumed by qticket.verify against the same secret.

def _junk_token(serial: str, n_qubits: int, rng: np.random.Generator) -> TokenInstance:
    labels = rng.integers(0, len(LABELS), size=n_qubits)
    return TokenInstance(serial, PROJECTOR_STACK[labels].copy())


@dataclass(eq=False)
class CloneThenAdaptDriver:
    """Clone once with the symmetric cloner, hand the halves to the first
    two verifiers, then fall back to fresh six-state guesses."""

    name: str = "clone-then-adapt"
    _halves: list = field(default_factory=list, repr=False)
    _serial: str = ""
    _n: int = 0

    def begin(self, token: TokenInstance, policy: VerifierPolicy,
              rng: np.random.Generator) -> None:
        self._serial, self._n = token.serial, token.n_qubits
        self._halves = list(counterfeit(token, UNIVERSAL_CLONER, rng))

    def submission(self, history: tuple[bool, ...],
                   rng: np.random.Generator) -> TokenInstance:
        if self._halves:
            return self._halves.pop(0)
        return _junk_token(self._serial, self._n, rng)


@dataclass(eq=False)
class ResubmitAfterRejectDriver:
    """Measure the whole token in the Z basis, reprepare the outcomes, and
    keep resubmitting the same preparation no matter the verdicts."""

    name: str = "resubmit-after-reject"
    _prep: np.ndarray | None = field(default=None, repr=False)
    _serial: str = ""

    def begin(self, token: TokenInstance, policy: VerifierPolicy,
              rng: np.random.Generator) -> None:
        if token.consumed or token.qubits is None:
            raise ValueError("driver needs the fresh physical token")
        token.consumed = True
        p0 = np.clip(token.qubits[:, 0, 0].real, 0.0, 1.0)
        ones = rng.random(token.n_qubits) >= p0
        self._prep = PROJECTOR_STACK[np.where(ones, 1, 0)]
        self._serial = token.serial

    def submission(self, history: tuple[bool, ...],
                   rng: np.random.Generator) -> TokenInstance:
        return TokenInstance(self._serial, self._prep.copy())


@dataclass(eq=False)
class HonestOnceThenNoiseDriver:
    """Spend the genuine token at the first verifier, then try uniformly
    guessed substitutes at the rest."""

    name: str = "honest-once-then-noise"
    _token: TokenInstance | None = field(default=None, repr=False)
    _serial: str = ""
    _n: int = 0

    def begin(self, token: TokenInstance, policy: VerifierPolicy,
              rng: np.random.Generator) -> None:
        self._token = token
        self._serial, self._n = token.serial, token.n_qubits

    def submission(self, history: tuple[bool, ...],
                   rng: np.random.Generator) -> TokenInstance:
        if self._token is not None:
            genuine, self._token = self._token, None
            return genuine
        return _junk_token(self._serial, self._n, rng)


DRIVERS: dict[str, Callable[[], object]] = {
    "clone-then-adapt": CloneThenAdaptDriver,
    "resubmit-after-reject": ResubmitAfterRejectDriver,
    "honest-once-then-noise": HonestOnceThenNoiseDriver,
}


def sequential_attack(driver, secret: QticketSecret, v: int,
                      policy: VerifierPolicy,
                      rng: np.random.Generator) -> list[VerificationOutcome]:
    """Run one holder against ``v`` sequential verifications of one serial.

    The driver sees the boolean verdict history before each submission.
    Returns the full transcript of outcomes.
    """
    if v < 1:
        raise ValueError("need at least one verification")
    drv = DRIVERS[driver]() if isinstance(driver, str) else driver
    drv.begin(token_from_secret(secret), policy, rng)
    history: list[bool] = []
    transcript: list[VerificationOutcome] = []
    for _ in range(v):
        submission = drv.submission(tuple(history), rng)
        outcome = verify(secret, submission, policy, rng)
        transcript.append(outcome)
        history.append(outcome.accepted)
    return transcript


# ---------------------------------------------------------------------------
# Batched rate estimators for the same drivers.
#
# Per-position statistics are memoized from the actual strategy maps, then
# sampled in bulk; each function returns a (trials, n_verifiers) boolean
# matrix distributed exactly like the object-level transcripts.

RateDriver = Callable[[int, int, int, int, np.random.Generator], np.ndarray]


def _uniform_guess_success() -> float:
    """Per-position success of submitting a uniformly random six-state
    qubit: mean of Tr[P_label P_guess] over all label/guess pairs."""
    overlaps = np.einsum("aij,bji->ab", PROJECTOR_STACK, PROJECTOR_STACK).real
    return float(overlaps.mean())


def _guess_counts(n_qubits: int, shape: tuple[int, ...],
                  rng: np.random.Generator) -> np.ndarray:
    return rng.binomial(n_qubits, _uniform_guess_success(), size=shape)


def rate_clone_then_adapt(n_qubits: int, k_min: int, n_verifiers: int,
                          trials: int, rng: np.random.Generator) -> np.ndarray:
    dists = np.array([pair_outcome_distribution(UNIVERSAL_CLONER, lab)
                      for lab in LABELS])
    if np.ptp(dists, axis=0).max() > 1e-12:
        raise AssertionError("symmetric cloner statistics should not depend on the label")
    counts = rng.multinomial(n_qubits, dists[0], size=trials)
    accepts = np.zeros((trials, n_verifiers), dtype=bool)
    accepts[:, 0] = counts[:, 0] + counts[:, 1] >= k_min
    if n_verifiers > 1:
        accepts[:, 1] = counts[:, 0] + counts[:, 2] >= k_min
    if n_verifiers > 2:
        junk = _guess_counts(n_qubits, (trials, n_verifiers - 2), rng)
        accepts[:, 2:] = junk >= k_min
    return accepts


def rate_resubmit_after_reject(n_qubits: int, k_min: int, n_verifiers: int,
                               trials: int, rng: np.random.Generator) -> np.ndarray:
    """Positions labelled on the Z axis survive the measure-reprepare step
    exactly; the rest collapse to Z eigenstates and score 1/2 independently
    at every verifier."""
    p_axis = sum(1 for lab in LABELS if lab.axis == "Z") / len(LABELS)
    n_z = rng.binomial(n_qubits, p_axis, size=trials)
    rest = rng.binomial((n_qubits - n_z)[:, None], 0.5,
                        size=(trials, n_verifiers))
    return n_z[:, None] + rest >= k_min


def rate_honest_once_then_noise(n_qubits: int, k_min: int, n_verifiers: int,
                                trials: int, rng: np.random.Generator) -> np.ndarray:
    accepts = np.zeros((trials, n_verifiers), dtype=bool)
    accepts[:, 0] = n_qubits >= k_min
    if n_verifiers > 1:
        junk = _guess_counts(n_qubits, (trials, n_verifiers - 1), rng)
        accepts[:, 1:] = junk >= k_min
    return accepts


RATE_DRIVERS: dict[str, RateDriver] = {
    "clone-then-adapt": rate_clone_then_adapt,
    "resubmit-after-reject": rate_resubmit_after_reject,
    "honest-once-then-noise": rate_honest_once_then_noise,
}


@dataclass(frozen=True)
class AttackSummary:
    driver: str
    trials: int
    n_verifiers: int
    double_accepts: int
    accept_histogram: tuple[int, ...]   # indexed by number of accepting verifiers
    rate: float
    bound: BoundReport


def sequential_attack_rate(n_qubits: int, f_tol, n_verifiers: int,
                           driver: str | RateDriver, trials: int,
                           rng: np.random.Generator) -> AttackSummary:
    """Estimate the double-acceptance rate of a sequential driver over many
    trials and compare with the pairwise union bound."""
    if n_verifiers < 2:
        raise ValueError("need at least two verifiers")
    name = driver if isinstance(driver, str) else getattr(driver, "__name__", "custom")
    fn = RATE_DRIVERS[driver] if isinstance(driver, str) else driver
    k_min = threshold_count(f_tol, n_qubits)
    accepts = fn(n_qubits, k_min, n_verifiers, trials, rng)
    if accepts.shape != (trials, n_verifiers):
        raise ValueError("driver returned a matrix of the wrong shape")
    per_trial = accepts.sum(axis=1)
    hist = np.bincount(per_trial, minlength=n_verifiers + 1)
    double = int((per_trial >= 2).sum())
    return AttackSummary(
        driver=name,
        trials=trials,
        n_verifiers=n_verifiers,
        double_accepts=double,
        accept_histogram=tuple(int(x) for x in hist),
        rate=double / trials,
        bound=learning_bound(n_qubits, f_tol, n_verifiers),
    )


# ---------------------------------------------------------------------------
# Challenge-response attackers.  Both implement prepare()/answer() and are
# consumed by qtokens.cv.double_spend_experiment.

def intermediate_basis_bits(qubits: np.ndarray,
                            rng: np.random.Generator) -> np.ndarray:
    """Measure every qubit of a (..., 2, 2) stack in the intermediate basis
    once; +1 outcomes are reported as bit 0 under either axis."""
    proj = _intermediate_projector()
    p_plus = np.einsum("ij,...ji->...", proj, np.asarray(qubits, dtype=complex)).real
    p_plus = np.clip(p_plus, 0.0, 1.0)
    return (rng.random(p_plus.shape) >= p_plus).astype(np.uint8)


def intermediate_basis_answers(pair_state: np.ndarray,
                               rng: np.random.Generator
                               ) -> tuple[tuple[int, int], tuple[int, int]]:
    """Measure both qubits of one 4x4 pair state in the eigenbasis of
    (X+Z)/sqrt(2) and derive the X-report and Z-report from the single
    outcome per qubit (+1 eigenvalue -> bit 0 under either axis)."""
    rho = np.asarray(pair_state, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a two-qubit state, got shape {rho.shape}")
    singles = np.stack([partial_trace(rho, trace_out=1),
                        partial_trace(rho, trace_out=0)])
    bits = intermediate_basis_bits(singles, rng)
    reports = (int(bits[0]), int(bits[1]))
    return reports, reports


@dataclass(eq=False)
class IntermediateBasisAttacker:
    """Question-independent strategy: commit to intermediate-basis outcomes
    up front and reuse them for every challenge."""

    name: str = "intermediate-basis"
    _bits: np.ndarray | None = field(default=None, repr=False)

    def prepare(self, token: CvToken, rng: np.random.Generator) -> None:
        if token.consumed:
            raise ValueError("token already consumed")
        token.consumed = True
        self._bits = intermediate_basis_bits(token.qubits, rng)

    def answer(self, question: ChallengeQuestion,
               rng: np.random.Generator) -> np.ndarray:
        if self._bits is None:
            raise RuntimeError("prepare() must run before answer()")
        return self._bits


@dataclass(eq=False)
class HonestCopyAttacker:
    """Measure honestly for the first challenge and replay that sheet
    verbatim afterwards.  Blocks whose asked axis changed carry outcomes
    measured in the wrong basis, which score like uniform guesses."""

    name: str = "honest-copy"
    _token: CvToken | None = field(default=None, repr=False)
    _sheet: np.ndarray | None = field(default=None, repr=False)

    def prepare(self, token: CvToken, rng: np.random.Generator) -> None:
        self._token = token
        self._sheet = None

    def answer(self, question: ChallengeQuestion,
               rng: np.random.Generator) -> np.ndarray:
        if self._sheet is None:
            if self._token is None:
                raise RuntimeError("prepare() must run before answer()")
            self._sheet = honest_answer(self._token, question, None, rng).outcomes
        return self._sheet


CV_ATTACKERS: dict[str, Callable[[], object]] = {
    "intermediate-basis": IntermediateBasisAttacker,
    "honest-copy": HonestCopyAttacker,
    "answer-reuse": HonestCopyAttacker,
}
