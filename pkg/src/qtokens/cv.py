"""Classically-verified tokens: paired-qubit blocks checked over a wire.

A token has n blocks of r qubit pairs; each pair holds one Z eigenstate and
one X eigenstate in random order.  The verifier challenges each block with
an axis, the holder measures both members of every pair along it and reports
the bits, and the verifier scores only the member whose preparation axis was
asked.  A token passes when every block clears ceil(f_tol * r) correct
scored bits, so acceptance never requires revealing which member mattered.

The verifier side runs as a message-driven session over
:class:`~qtokens.wire.LineChannel`; redemption budgets live in
:class:`~qtokens.store.SecretStore`.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bounds import (BoundReport, InsecureParametersError, cv_security_bound,
                     cv_soundness_bound)
from .channels import NoiseModel, QubitChannel, average_fidelity, identity_channel
from .core import CV_PAIR_LABELS, LABEL_INDEX, LABELS, PROJECTOR_STACK, StateLabel
from .games import build_cv_pair_games, selective_value, threshold_game_bound
from .rational import as_fraction, threshold_count
from .rng import new_serial
from .store import SecretStore, UnknownSerialError
from . import wire

AXES = ("Z", "X")

# label index -> axis code (0 = Z, 1 = X, 2 = Y) and eigenbit
_AXIS_CODE6 = np.array([{"Z": 0, "X": 1, "Y": 2}[lab.axis] for lab in LABELS],
                       dtype=np.uint8)
_EIGENBIT6 = np.array([lab.eigenbit for lab in LABELS], dtype=np.uint8)
_PAIR_TABLE = np.array([[LABEL_INDEX[a], LABEL_INDEX[b]] for a, b in CV_PAIR_LABELS],
                       dtype=np.uint8)
_PLUS_PROJECTORS = np.stack([PROJECTOR_STACK[LABEL_INDEX[StateLabel("Z+")]],
                             PROJECTOR_STACK[LABEL_INDEX[StateLabel("X+")]]])


@dataclass(frozen=True)
class CvLayout:
    """Block structure and acceptance threshold."""

    n_blocks: int
    block_size: int
    f_tol: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "f_tol", as_fraction(self.f_tol))
        if self.n_blocks < 1 or self.block_size < 1:
            raise ValueError("need at least one block and one pair per block")
        if not 0 <= self.f_tol <= 1:
            raise ValueError(f"f_tol must lie in [0, 1], got {self.f_tol}")

    @property
    def k_min(self) -> int:
        return threshold_count(self.f_tol, self.block_size)

    @property
    def n_qubits(self) -> int:
        return self.n_blocks * self.block_size * 2


@dataclass(frozen=True)
class CvSecret:
    serial: str
    pairs: np.ndarray          # (n, r, 2) uint8 label indices


@dataclass(eq=False)
class CvToken:
    serial: str
    qubits: np.ndarray         # (n, r, 2, 2, 2) product states
    consumed: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.qubits.shape[0], self.qubits.shape[1]


@dataclass(frozen=True)
class ChallengeQuestion:
    question_id: str
    axes: tuple[str, ...]

    def __post_init__(self) -> None:
        if any(a not in AXES for a in self.axes):
            raise ValueError(f"axes must be drawn from {AXES}")


@dataclass(frozen=True)
class AnswerSheet:
    question_id: str
    outcomes: np.ndarray       # (n, r, 2) bits


@dataclass(frozen=True)
class ScoreCard:
    per_block_correct: tuple[int, ...]
    k_min: int
    accepted: bool


def _question_codes(question: ChallengeQuestion) -> np.ndarray:
    return np.array([AXES.index(a) for a in question.axes], dtype=np.uint8)


def cv_issue(layout: CvLayout, rng: np.random.Generator,
             serial: str | None = None, *,
             pauli_frame: bool = False) -> tuple[CvSecret, CvToken]:
    """Draw one of the eight ordered Z/X pair preparations per position.

    With ``pauli_frame`` the issuer additionally flips each qubit to the
    orthogonal state of its axis with probability 1/2 and records the
    flipped labels, so conditional states under axis-biased noise carry no
    usable structure.  Off by default; the label distribution is uniform
    either way.
    """
    picks = rng.integers(0, len(_PAIR_TABLE), size=(layout.n_blocks, layout.block_size))
    pairs = _PAIR_TABLE[picks]
    if pauli_frame:
        flips = rng.integers(0, 2, size=pairs.shape, dtype=np.uint8)
        pairs = pairs ^ flips          # orthogonal partner lives at index^1
    qubits = PROJECTOR_STACK[pairs].copy()
    serial = serial if serial is not None else new_serial(rng)
    return CvSecret(serial, pairs), CvToken(serial, qubits)


def apply_noise(token: CvToken, channel: QubitChannel) -> CvToken:
    n, r = token.shape
    flat = token.qubits.reshape(-1, 2, 2)
    return CvToken(token.serial, channel.apply_to_stack(flat).reshape(n, r, 2, 2, 2))


def random_question(layout: CvLayout, rng: np.random.Generator) -> ChallengeQuestion:
    picks = rng.integers(0, 2, size=layout.n_blocks)
    return ChallengeQuestion(rng.bytes(8).hex(), tuple(AXES[i] for i in picks))


def complement_question(question: ChallengeQuestion,
                        rng: np.random.Generator) -> ChallengeQuestion:
    flipped = tuple("X" if a == "Z" else "Z" for a in question.axes)
    return ChallengeQuestion(rng.bytes(8).hex(), flipped)


def honest_answer(token: CvToken, question: ChallengeQuestion,
                  noise: NoiseModel | QubitChannel | None,
                  rng: np.random.Generator) -> AnswerSheet:
    """Measure both members of every pair along the block's asked axis,
    optionally degrading each qubit through its channel first."""
    n, r = token.shape
    if len(question.axes) != n:
        raise ValueError(f"question covers {len(question.axes)} blocks, token has {n}")
    if token.consumed:
        raise ValueError("token already consumed")
    token.consumed = True
    qubits = token.qubits
    if isinstance(noise, QubitChannel):
        noise = NoiseModel.uniform(noise, n * r * 2)
    if noise is not None:
        qubits = noise.apply(qubits.reshape(-1, 2, 2)).reshape(qubits.shape)
    proj = _PLUS_PROJECTORS[_question_codes(question)]           # (n, 2, 2)
    p_zero = np.einsum("nij,nrpji->nrp", proj, qubits).real
    p_zero = np.clip(p_zero, 0.0, 1.0)
    bits = (rng.random(p_zero.shape) >= p_zero).astype(np.uint8)
    return AnswerSheet(question.question_id, bits)


def score_answer(secret: CvSecret, question: ChallengeQuestion,
                 answer: AnswerSheet | np.ndarray, layout: CvLayout) -> ScoreCard:
    """Score the pair member whose preparation axis matches the question."""
    if isinstance(answer, AnswerSheet):
        if answer.question_id != question.question_id:
            raise ValueError(
                f"answer is for question {answer.question_id!r}, "
                f"expected {question.question_id!r}")
        outcomes = answer.outcomes
    else:
        outcomes = answer
    outcomes = np.asarray(outcomes)
    n, r = layout.n_blocks, layout.block_size
    if outcomes.shape != (n, r, 2):
        raise ValueError(f"outcomes must have shape {(n, r, 2)}, got {outcomes.shape}")
    if not np.isin(outcomes, (0, 1)).all():
        raise ValueError("outcomes must be bits")
    if len(question.axes) != n:
        raise ValueError("question does not match the layout")
    codes = _question_codes(question)
    axis_codes = _AXIS_CODE6[secret.pairs]
    scored = axis_codes == codes[:, None, None]
    if not (scored.sum(axis=2) == 1).all():
        raise ValueError("each pair must hold exactly one member on the asked axis")
    correct = (outcomes == _EIGENBIT6[secret.pairs]) & scored
    per_block = correct.sum(axis=(1, 2))
    k = layout.k_min
    return ScoreCard(tuple(int(c) for c in per_block), k, bool((per_block >= k).all()))


def register(store: SecretStore, layout: CvLayout, secret: CvSecret) -> None:
    store.add_cv(secret.serial, layout.n_blocks, layout.block_size,
                 layout.f_tol, secret.pairs)


def _secret_from_record(rec: dict) -> tuple[CvLayout, CvSecret]:
    layout = CvLayout(int(rec["n"]), int(rec["r"]), Fraction(rec["f_tol"]))
    idx = np.array([[LABEL_INDEX[StateLabel(a)], LABEL_INDEX[StateLabel(b)]]
                    for a, b in rec["pairs"]], dtype=np.uint8)
    pairs = idx.reshape(layout.n_blocks, layout.block_size, 2)
    return layout, CvSecret(rec["serial"], pairs)


# ---------------------------------------------------------------------------
# Wire sessions.

QUESTION_POLICIES = ("random", "fixed", "complementary")


class CvVerifier:
    """One verification session per call: hello -> challenge -> answer ->
    verdict, with error aborts for unknown serials and exhausted budgets."""

    def __init__(self, store: SecretStore, rng: np.random.Generator,
                 question_policy: str = "random", max_attempts: int = 8):
        if question_policy not in QUESTION_POLICIES:
            raise ValueError(f"unknown question policy: {question_policy}")
        self.store = store
        self.rng = rng
        self.question_policy = question_policy
        self.max_attempts = max_attempts

    def _pick_question(self, layout: CvLayout, serial: str) -> ChallengeQuestion:
        stashed = self.store.stashed_question(serial)
        if self.question_policy == "random" or stashed is None:
            question = random_question(layout, self.rng)
        elif self.question_policy == "fixed":
            question = ChallengeQuestion(self.rng.bytes(8).hex(), tuple(stashed))
        else:
            question = complement_question(
                ChallengeQuestion("stashed", tuple(stashed)), self.rng)
        self.store.stash_question(serial, list(question.axes))
        return question

    def serve_one(self, chan: wire.LineChannel) -> dict | None:
        """Run a single session; returns the final message sent (or None on
        immediate EOF)."""
        try:
            msg = chan.recv()
        except wire.ProtocolError as exc:
            return self._abort(chan, "protocol-error", str(exc))
        if msg is None:
            return None
        if msg["type"] != "hello" or "serial" not in msg:
            return self._abort(chan, "protocol-error", "expected hello with a serial")
        serial = msg["serial"]
        try:
            rec = self.store.get(serial)
        except UnknownSerialError:
            return self._abort(chan, "unknown-serial", serial)
        if "pairs" not in rec:
            return self._abort(chan, "protocol-error",
                               f"serial {serial} is not a paired-block token")
        if rec["accepted_count"] >= 1:
            return self._abort(chan, "already-redeemed", serial)
        if rec["attempts"] >= self.max_attempts:
            return self._abort(chan, "attempt-budget-exceeded", serial)
        layout, secret = _secret_from_record(rec)
        question = self._pick_question(layout, serial)
        self.store.record_attempt(serial, False)
        chan.send(wire.challenge_message(question.question_id, question.axes))

        try:
            reply = chan.recv()
        except wire.ProtocolError as exc:
            return self._abort(chan, "protocol-error", str(exc))
        if reply is None or reply["type"] != "answer":
            return self._abort(chan, "protocol-error", "expected an answer")
        if reply.get("question_id") != question.question_id:
            return self._finish(chan, False, "question-mismatch")
        try:
            outcomes = np.asarray(wire.decode_outcomes(reply["outcomes"]),
                                  dtype=np.uint8)
            card = score_answer(secret, question, outcomes, layout)
        except (KeyError, TypeError, ValueError, wire.ProtocolError) as exc:
            return self._abort(chan, "protocol-error", f"malformed answer: {exc}")
        if card.accepted and not self.store.try_accept(serial):
            return self._finish(chan, False, "already-redeemed")
        reason = None if card.accepted else "below-threshold"
        return self._finish(chan, card.accepted, reason)

    def _abort(self, chan: wire.LineChannel, code: str, detail: str) -> dict:
        msg = wire.error_message(code, detail)
        try:
            chan.send(msg)
        except OSError:
            pass
        return msg

    def _finish(self, chan: wire.LineChannel, accepted: bool,
                reason: str | None) -> dict:
        msg = wire.verdict_message(accepted, reason)
        chan.send(msg)
        return msg


def run_holder(chan: wire.LineChannel, token: CvToken,
               rng: np.random.Generator,
               noise: NoiseModel | QubitChannel | None = None) -> dict:
    """Honest holder: measure per the challenge and report the bits.
    Returns the verifier's final message (verdict or error)."""
    chan.send(wire.hello_message(token.serial))
    msg = chan.recv()
    if msg is None:
        raise wire.ProtocolError("verifier hung up before challenging")
    if msg["type"] == "error":
        return msg
    if msg["type"] != "challenge":
        raise wire.ProtocolError(f"expected a challenge, got {msg['type']}")
    question = ChallengeQuestion(msg["question_id"], tuple(msg["axes"]))
    answer = honest_answer(token, question, noise, rng)
    chan.send(wire.answer_message(answer.question_id, answer.outcomes))
    verdict = chan.recv()
    if verdict is None:
        raise wire.ProtocolError("verifier hung up before the verdict")
    return verdict


def verifier_session(secret: CvSecret, layout: CvLayout, policy: str,
                     chan: wire.LineChannel,
                     rng: np.random.Generator,
                     max_attempts: int = 8) -> dict | None:
    """Serve one holder over an open channel with an ephemeral store.

    Loops full challenge-response rounds (allowing retries under the given
    question policy) until the holder hangs up; returns the last message
    sent, or None if the holder never spoke.
    """
    store = SecretStore()
    register(store, layout, secret)
    verifier = CvVerifier(store, rng, question_policy=policy,
                          max_attempts=max_attempts)
    last: dict | None = None
    while True:
        sent = verifier.serve_one(chan)
        if sent is None:
            return last
        last = sent


# ---------------------------------------------------------------------------
# Batched experiments.

@dataclass(frozen=True)
class HonestRunReport:
    trials: int
    accepts: int
    rate: float
    bound: BoundReport


def _per_label_bit_zero(channel: QubitChannel) -> np.ndarray:
    """(6, 2) table of P[reported bit = 0] for each preparation label under
    each asked axis, from the actual post-channel states."""
    noisy = channel.apply_to_stack(PROJECTOR_STACK)
    return np.einsum("aij,lji->la", _PLUS_PROJECTORS, noisy).real.clip(0.0, 1.0)


def honest_protocol_experiment(layout: CvLayout, channel: QubitChannel | None,
                               trials: int, rng: np.random.Generator,
                               batch: int = 512) -> HonestRunReport:
    """Many honest issue-challenge-answer-score rounds.

    States stay products and measurements are independent across qubits, so
    per-qubit outcome laws collapse to a (label, axis) table computed from
    the actual channel; sampling then vectorizes across whole trials.
    """
    chan = channel if channel is not None else identity_channel()
    table = _per_label_bit_zero(chan)
    n, r, k = layout.n_blocks, layout.block_size, layout.k_min
    accepts = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        pairs = _PAIR_TABLE[rng.integers(0, len(_PAIR_TABLE), size=(b, n, r))]
        codes = rng.integers(0, 2, size=(b, n), dtype=np.uint8)
        p_zero = table[pairs, codes[:, :, None, None]]
        bits = (rng.random(p_zero.shape) >= p_zero).astype(np.uint8)
        scored = _AXIS_CODE6[pairs] == codes[:, :, None, None]
        per_block = ((bits == _EIGENBIT6[pairs]) & scored).sum(axis=(2, 3))
        accepts += int((per_block >= k).all(axis=1).sum())
        done += b
    bound = cv_soundness_bound(n, r, average_fidelity(chan), layout.f_tol)
    return HonestRunReport(trials, accepts, accepts / trials, bound)


PAIRINGS = ("independent", "complementary")


@dataclass(frozen=True)
class DoubleSpendReport:
    attacker: str
    pairing: str
    trials: int
    successes: int
    rate: float
    bound: float
    mean_pair_utility: float

    def __iter__(self):
        yield self.rate
        yield self.bound


def complementary_double_spend_bound(layout: CvLayout) -> float:
    """min(1, 2 e^{-r D(f_tol || v_avg)})^n with v_avg the selective value of
    the balanced average game, computed live."""
    v_avg = selective_value(build_cv_pair_games().g_avg).value
    f = float(layout.f_tol)
    if f < v_avg:
        return 1.0
    per_block = threshold_game_bound([v_avg] * layout.block_size, f)
    return min(1.0, per_block) ** layout.n_blocks


def double_spend_experiment(layout: CvLayout, attacker, pairing: str,
                            trials: int,
                            rng: np.random.Generator) -> DoubleSpendReport:
    """One token, two verifiers.  The attacker preprocesses the token once,
    then must answer both challenges; success means both accept.

    mean_pair_utility averages scored-position correctness over both
    verifiers; under complementary pairing the two questions jointly score
    each pair's X and Z member exactly once, so this is the per-pair
    average-utility statistic bounded by the balanced pair game's value.
    """
    if pairing not in PAIRINGS:
        raise ValueError(f"unknown pairing: {pairing}")
    successes = 0
    scored_correct = 0
    for _ in range(trials):
        secret, token = cv_issue(layout, rng)
        attacker.prepare(token, rng)
        q1 = random_question(layout, rng)
        q2 = (random_question(layout, rng) if pairing == "independent"
              else complement_question(q1, rng))
        card1 = score_answer(secret, q1, attacker.answer(q1, rng), layout)
        card2 = score_answer(secret, q2, attacker.answer(q2, rng), layout)
        scored_correct += sum(card1.per_block_correct) + sum(card2.per_block_correct)
        if card1.accepted and card2.accepted:
            successes += 1
    if pairing == "independent":
        try:
            bound = cv_security_bound(layout.n_blocks, layout.block_size,
                                      layout.f_tol, v=2).clamped
        except InsecureParametersError:
            bound = 1.0
    else:
        bound = complementary_double_spend_bound(layout)
    name = getattr(attacker, "name", type(attacker).__name__)
    scored_total = 2 * layout.n_blocks * layout.block_size * trials
    return DoubleSpendReport(name, pairing, trials, successes,
                             successes / trials, bound,
                             scored_correct / scored_total)
