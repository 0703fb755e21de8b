"""Single-qubit noise channels in Kraus form."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import I2, PAULIS, PROJECTOR_STACK, check_density_matrix

ATOL_COMPLETENESS = 1e-10


@dataclass(frozen=True, eq=False)
class QubitChannel:
    """Completely positive trace-preserving map on one qubit.

    ``kraus`` operators K_i must satisfy sum_i K_i^dagger K_i = identity
    within 1e-10; this is checked at construction.
    """

    name: str
    kraus: tuple[np.ndarray, ...]
    _stack: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        stack = np.stack([np.asarray(k, dtype=complex) for k in self.kraus])
        if stack.shape[1:] != (2, 2):
            raise ValueError("Kraus operators must be 2x2")
        total = np.einsum("kba,kbc->ac", stack.conj(), stack)
        if np.max(np.abs(total - I2)) > ATOL_COMPLETENESS:
            raise ValueError(f"{self.name}: Kraus completeness violated beyond {ATOL_COMPLETENESS}")
        stack.setflags(write=False)
        object.__setattr__(self, "_stack", stack)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply_channel(self, rho)

    def apply_to_stack(self, states: np.ndarray) -> np.ndarray:
        """Apply to an (N, 2, 2) stack of states in one shot."""
        k = self._stack
        return np.einsum("kab,nbc,kdc->nad", k, states, k.conj())


def apply_channel(channel: QubitChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"apply_channel expects a 2x2 state, got {rho.shape}")
    k = channel._stack
    return np.einsum("kab,bc,kdc->ad", k, rho, k.conj())


def identity_channel() -> QubitChannel:
    return QubitChannel("identity", (I2.copy(),))


def depolarizing(lam: float) -> QubitChannel:
    """rho -> (1 - lam) rho + lam I/2.

    Valid (completely positive) for 0 <= lam <= 4/3.
    """
    if not 0.0 <= lam <= 4.0 / 3.0:
        raise ValueError(f"depolarizing parameter {lam} outside [0, 4/3]")
    ops = [np.sqrt(1 - 3 * lam / 4) * I2]
    ops += [np.sqrt(lam / 4) * PAULIS[p] for p in "XYZ"]
    return QubitChannel(f"depolarizing({lam})", tuple(ops))


def dephasing(lam: float, axis: str = "Z") -> QubitChannel:
    """rho -> (1 - lam) rho + lam P rho P about the chosen Pauli axis.

    At lam = 1/2 the coherences transverse to the axis vanish entirely.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"dephasing parameter {lam} outside [0, 1]")
    if axis not in PAULIS:
        raise ValueError(f"axis must be one of X, Y, Z, got {axis!r}")
    return QubitChannel(
        f"dephasing({lam},{axis})",
        (np.sqrt(1 - lam) * I2, np.sqrt(lam) * PAULIS[axis]),
    )


def amplitude_damping(gamma: float) -> QubitChannel:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"damping parameter {gamma} outside [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return QubitChannel(f"amplitude_damping({gamma})", (k0, k1))


def depolarizing_for_fidelity(f_expected: float) -> QubitChannel:
    """Depolarizing channel whose average fidelity over the six states is
    exactly ``f_expected`` (solves lam = 2 (1 - F))."""
    if not 1.0 / 3.0 <= f_expected <= 1.0:
        raise ValueError(f"target fidelity {f_expected} outside [1/3, 1]")
    # rounding of 2 (1 - F) can overshoot 4/3 by one ulp at the floor
    return depolarizing(min(2.0 * (1.0 - f_expected), 4.0 / 3.0))


def average_fidelity(channel: QubitChannel) -> float:
    """Mean of Tr[rho M(rho)] over the six-state set."""
    out = channel.apply_to_stack(PROJECTOR_STACK)
    return float(np.einsum("nij,nji->n", PROJECTOR_STACK, out).real.mean())


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Per-position channel assignment for a many-qubit token."""

    channels: tuple[QubitChannel, ...]

    @classmethod
    def uniform(cls, channel: QubitChannel, n: int) -> "NoiseModel":
        return cls((channel,) * n)

    def __len__(self) -> int:
        return len(self.channels)

    @property
    def homogeneous(self) -> bool:
        first = self.channels[0]
        return all(c is first for c in self.channels)

    def apply(self, states: np.ndarray) -> np.ndarray:
        """Degrade an (N, 2, 2) stack; validates output states."""
        states = np.asarray(states, dtype=complex)
        if states.shape != (len(self.channels), 2, 2):
            raise ValueError(
                f"noise model covers {len(self.channels)} qubits, got stack {states.shape}")
        if self.homogeneous:
            out = self.channels[0].apply_to_stack(states)
        else:
            out = np.stack([apply_channel(c, s) for c, s in zip(self.channels, states)])
        # spot-check the first output rather than all N (cost control)
        check_density_matrix(out[0], name="degraded qubit")
        return out
