"""Measured quantum tokens: issuance, degradation, verification, oracles.

A token is a list of qubits prepared in states drawn uniformly from the
six-state set; the issuer remembers the labels under a random serial.  The
verifier measures every position against its recorded label and accepts
when at least ceil(F_tol * N) outcomes match.  Acceptance thresholds are
exact rationals; see :mod:`qtokens.rational`.

Counterfeit tokens created by pair-cloning strategies come in correlated
twos: the per-position four-outcome joint measurement is sampled once (at
first verification) and the marginals handed to the two instances, so joint
verification statistics are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .channels import NoiseModel
from .core import I2, PROJECTOR_STACK, LABELS
from .rational import as_fraction, threshold_count
from .rng import new_serial
from .store import SecretStore, UnknownSerialError, labels_from_strings


class TokenConsumedError(RuntimeError):
    """A token instance was submitted for verification twice."""


@dataclass(frozen=True)
class QticketSecret:
    """Issuer-side record: serial plus per-position label indices."""

    serial: str
    labels: np.ndarray  # (N,) uint8 indices into core.LABELS

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def label_list(self):
        return [LABELS[i] for i in self.labels]

    def projectors(self) -> np.ndarray:
        return PROJECTOR_STACK[self.labels]


class CorrelatedPair:
    """Shared measurement record for the two outputs of a pair-cloning map.

    Holds the per-position two-qubit post-cloning states; the four-outcome
    joint measurement against the verifier's projectors is sampled lazily on
    first use and the outcome bits are then fixed for both sides.
    """

    def __init__(self, states_4x4: np.ndarray,
                 rng: np.random.Generator | None = None):
        self.states = np.asarray(states_4x4, dtype=complex)
        if self.states.ndim != 3 or self.states.shape[1:] != (4, 4):
            raise ValueError("expected an (N, 4, 4) stack")
        self.rng = rng             # counterfeiter-owned sampling stream
        self._bits: tuple[np.ndarray, np.ndarray] | None = None

    def outcome_bits(self, side: int, label_indices: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
        if self._bits is None:
            if self.rng is not None:
                rng = self.rng
            p = PROJECTOR_STACK[label_indices]
            q = I2[None, :, :] - p
            joint = np.stack([
                np.einsum("nab,ncd->nabcd", x, y).reshape(-1, 4, 4)
                for x, y in ((p, p), (p, q), (q, p), (q, q))
            ], axis=1)          # (N, 4, 4, 4): outcome order 11, 10, 01, 00
            probs = np.einsum("nkij,nji->nk", joint, self.states).real
            probs = np.clip(probs, 0.0, None)
            probs /= probs.sum(axis=1, keepdims=True)
            u = rng.random(len(self.states))
            idx = (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
            idx = np.minimum(idx, 3)
            first = (idx <= 1).astype(np.uint8)   # outcomes 11, 10
            second = ((idx == 0) | (idx == 2)).astype(np.uint8)
            self._bits = (first, second)
        return self._bits[side]


@dataclass(eq=False)
class TokenInstance:
    """Holder-side physical token; verification consumes it."""

    serial: str
    qubits: np.ndarray | None                      # (N, 2, 2) product states
    pair: CorrelatedPair | None = None
    side: int = 0
    consumed: bool = False
    n_qubits: int = field(default=0)

    def __post_init__(self) -> None:
        if self.qubits is not None:
            self.qubits = np.asarray(self.qubits, dtype=complex)
            self.n_qubits = len(self.qubits)
        elif self.pair is not None:
            self.n_qubits = len(self.pair.states)
        else:
            raise ValueError("token needs qubits or a correlated pair")


@dataclass(frozen=True)
class VerifierPolicy:
    """Acceptance rule: at least ceil(f_tol * n_qubits) matches."""

    f_tol: Fraction
    n_qubits: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "f_tol", as_fraction(self.f_tol))
        if not 0 <= self.f_tol <= 1:
            raise ValueError(f"f_tol must lie in [0, 1], got {self.f_tol}")

    @property
    def k_min(self) -> int:
        return threshold_count(self.f_tol, self.n_qubits)


@dataclass(frozen=True)
class VerificationOutcome:
    accepted: bool
    correct_count: int
    serial: str
    reason: str | None = None


def issue(n_qubits: int, rng: np.random.Generator) -> tuple[QticketSecret, TokenInstance]:
    """Draw N labels uniformly, mint a serial, emit the exact token."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    labels = rng.integers(0, len(LABELS), size=n_qubits).astype(np.uint8)
    serial = new_serial(rng)
    secret = QticketSecret(serial, labels)
    token = TokenInstance(serial, PROJECTOR_STACK[labels].copy())
    return secret, token


def multicopy_issue(n_qubits: int, copies: int,
                    rng: np.random.Generator) -> tuple[QticketSecret, list[TokenInstance]]:
    """c identical tokens sharing one serial and one label draw."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    secret, first = issue(n_qubits, rng)
    tokens = [first]
    tokens += [TokenInstance(secret.serial, first.qubits.copy()) for _ in range(copies - 1)]
    return secret, tokens


def token_from_secret(secret: QticketSecret) -> TokenInstance:
    return TokenInstance(secret.serial, PROJECTOR_STACK[secret.labels].copy())


def degrade(token: TokenInstance, model: NoiseModel) -> TokenInstance:
    """Pass every qubit through its channel; returns a fresh instance."""
    if token.qubits is None:
        raise ValueError("cannot degrade a correlated counterfeit")
    if len(model) != token.n_qubits:
        raise ValueError(f"noise model covers {len(model)} qubits, token has {token.n_qubits}")
    return TokenInstance(token.serial, model.apply(token.qubits))


def verify(secret: QticketSecret, token: TokenInstance, policy: VerifierPolicy,
           rng: np.random.Generator) -> VerificationOutcome:
    """Measure every position against the recorded label; consume the token.

    Accepts iff the match count reaches policy.k_min.  Serial mismatch
    raises :class:`UnknownSerialError`.
    """
    if token.consumed:
        raise TokenConsumedError(f"token {token.serial} already verified")
    if token.serial != secret.serial:
        raise UnknownSerialError(f"unknown-serial: {token.serial}")
    if token.n_qubits != policy.n_qubits or len(secret) != policy.n_qubits:
        raise ValueError("token/secret length does not match policy")
    token.consumed = True
    if token.pair is not None:
        bits = token.pair.outcome_bits(token.side, secret.labels, rng)
    else:
        probs = np.einsum("nij,nji->n", PROJECTOR_STACK[secret.labels], token.qubits).real
        bits = rng.random(token.n_qubits) < np.clip(probs, 0.0, 1.0)
    count = int(bits.sum())
    return VerificationOutcome(count >= policy.k_min, count, token.serial)


# ---------------------------------------------------------------------------
# Exact acceptance oracles.

def _unit(p) -> float:
    # accumulated float sums of what is mathematically a probability may
    # overshoot [0, 1] by a few 1e-12 at N ~ 1000
    return float(min(1.0, max(0.0, p)))


def exact_honest_acceptance(fidelities: Sequence[float], f_tol) -> float:
    """P[sum of independent Bernoulli(F_i) >= ceil(f_tol N)] by direct
    convolution of the count distribution (O(N^2))."""
    f = np.asarray(fidelities, dtype=float)
    if f.ndim != 1 or len(f) == 0:
        raise ValueError("fidelities must be a non-empty 1-d sequence")
    if f.min() < 0.0 or f.max() > 1.0:
        raise ValueError("fidelities must lie in [0, 1]")
    n = len(f)
    k_min = threshold_count(f_tol, n)
    if k_min > n:
        return 0.0
    if k_min <= 0:
        return 1.0
    dist = np.zeros(n + 1)
    dist[0] = 1.0
    for i, fi in enumerate(f):
        upper = dist[:i + 1] * fi
        dist[:i + 2] *= (1.0 - fi)
        dist[1:i + 2] += upper
    return _unit(math.fsum(dist[k_min:]))


def honest_acceptance_mc(fidelities: Sequence[float], f_tol, trials: int,
                         rng: np.random.Generator, batch: int = 2000) -> int:
    """Monte-Carlo twin of :func:`exact_honest_acceptance`; returns the
    number of accepting trials."""
    f = np.asarray(fidelities, dtype=float)
    k_min = threshold_count(f_tol, len(f))
    hits = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        counts = (rng.random((b, len(f))) < f).sum(axis=1)
        hits += int((counts >= k_min).sum())
        done += b
    return hits


def _log_multinomial_joint(n: int, k_min: int, p11: float, p10: float, p01: float) -> float:
    """Joint acceptance when p00 = 0: both counts >= k_min means the '10'
    and '01' counts are each <= n - k_min.  Direct trinomial sum in log
    space, O(N^2)."""
    m = n - k_min
    if m < 0:
        return 0.0
    logfact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n + 1)))))
    b = np.arange(0, m + 1)
    bb, cc = np.meshgrid(b, b, indexing="ij")
    aa = n - bb - cc
    valid = aa >= 0
    aa_s = np.where(valid, aa, 0)
    logp = (logfact[n] - logfact[aa_s] - logfact[bb] - logfact[cc]
            + aa_s * _safe_log(p11) + bb * _safe_log(p10) + cc * _safe_log(p01))
    # zero-probability outcome categories contribute only at zero counts
    logp = np.where(valid, logp, -np.inf)
    logp = np.where((bb > 0) & (p10 == 0.0), -np.inf, logp)
    logp = np.where((cc > 0) & (p01 == 0.0), -np.inf, logp)
    logp = np.where((aa_s > 0) & (p11 == 0.0), -np.inf, logp)
    peak = logp.max()
    if peak == -np.inf:
        return 0.0
    return _unit(np.exp(peak) * math.fsum(np.exp(logp - peak).ravel()))


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0.0 else 0.0


def double_acceptance_exact(n_qubits: int, f_tol, pair_dist) -> float:
    """P[count_1 >= k and count_2 >= k] for two tokens whose positions share
    iid four-way outcomes (both right, first only, second only, neither).

    Uses an O(N^2) trinomial sum when p00 = 0 and an O(N^3) lattice
    convolution otherwise.
    """
    p11, p10, p01, p00 = (float(x) for x in pair_dist)
    probs = (p11, p10, p01, p00)
    if min(probs) < -1e-12 or abs(sum(probs) - 1.0) > 1e-9:
        raise ValueError(f"pair distribution invalid: {probs}")
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    k_min = threshold_count(f_tol, n_qubits)
    if k_min > n_qubits:
        return 0.0
    if k_min <= 0:
        return 1.0
    if p00 <= 1e-15:
        return _log_multinomial_joint(n_qubits, k_min, p11, p10, p01)
    # lattice over (count_1, count_2)
    size = n_qubits + 1
    cur = np.zeros((size, size))
    cur[0, 0] = 1.0
    nxt = np.empty_like(cur)
    for _ in range(n_qubits):
        np.multiply(cur, p00, out=nxt)
        nxt[1:, 1:] += p11 * cur[:-1, :-1]
        nxt[1:, :] += p10 * cur[:-1, :]
        nxt[:, 1:] += p01 * cur[:, :-1]
        cur, nxt = nxt, cur
    return _unit(math.fsum(cur[k_min:, k_min:].ravel()))


class Verifier:
    """Store-backed verifier enforcing per-serial acceptance budgets."""

    def __init__(self, store: SecretStore):
        self.store = store

    def redeem(self, token: TokenInstance, rng: np.random.Generator) -> VerificationOutcome:
        rec = self.store.get(token.serial)   # raises UnknownSerialError
        if "labels" not in rec:
            raise ValueError(f"serial {token.serial} is not a measured-token record")
        if rec["accepted_count"] >= rec["issued_copies"]:
            token.consumed = True
            return VerificationOutcome(False, 0, token.serial, reason="serial-exhausted")
        secret = QticketSecret(rec["serial"], labels_from_strings(rec["labels"]))
        policy = VerifierPolicy(Fraction(rec["f_tol"]), len(secret))
        outcome = verify(secret, token, policy, rng)
        if outcome.accepted and not self.store.try_accept(token.serial):
            return VerificationOutcome(False, outcome.correct_count, token.serial,
                                       reason="serial-exhausted")
        return outcome
