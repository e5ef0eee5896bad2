"""Exact simulation of GHZ-class entangled states, Pauli gates, and decoy qubits.

Every entangled state used by the key-agreement sessions has the form

    (|b> + s * |~b>) / sqrt(2)

for an n-bit flip pattern ``b`` and a sign ``s`` in {+1, -1}: the four Bell
states for n=2 and the 2 * 2^(n-1) GHZ-class states for n >= 3.  Pauli gates
never leave this family, so a state is stored as its flip pattern plus a sign
instead of a dense statevector (a dense oracle lives in the test suite only).

The entanglement measurement is the usual CNOT fan-out from qubit 0 followed
by a Hadamard on qubit 0 and a computational-basis readout.  On this family
that circuit is a bijection onto basis outcomes, so measurement is a pure
function: the first outcome bit encodes the sign and the remaining bits the
flip pattern.  Global phase is discarded throughout (Y is tracked as X then Z).

Decoy qubits are single qubits drawn from {|0>, |1>, |+>, |->}.  Measuring a
decoy in its preparation basis is deterministic; a mismatched basis, or a
decoy that an eavesdropper has entangled with an ancilla, yields a uniformly
random bit (the reduced state of either half of a two-qubit GHZ-class pair is
maximally mixed).

All values are immutable; functions are pure given an explicit RNG handle, so
they are safe to use from many threads when each thread owns its generator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np


class Pauli(str, enum.Enum):
    """The four single-qubit Pauli operations."""

    I = "I"
    X = "X"
    Y = "Y"
    Z = "Z"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


#: Ops that flip the addressed bit of the flip pattern.
_BIT_FLIPPING = (Pauli.X, Pauli.Y)
#: Ops that flip the relative sign.
_SIGN_FLIPPING = (Pauli.Y, Pauli.Z)


def _complement(bits: str) -> str:
    return "".join("1" if b == "0" else "0" for b in bits)


@dataclass(frozen=True)
class EntangledState:
    """Compact GHZ-class state ``(|flips> + sign * |~flips>) / sqrt(2)``.

    The stored form is canonical: the first flip bit is always 0.  The two
    representations ``(b, s)`` and ``(~b, s)`` describe the same state up to a
    global phase of ``s``, so the constructor complements ``flips`` when its
    first bit is 1 and keeps the sign.  Canonical form makes state equality
    and measurement pure functions.
    """

    flips: str
    sign: int

    def __post_init__(self) -> None:
        if len(self.flips) < 2:
            raise ValueError("entangled states need at least two qubits")
        if set(self.flips) - {"0", "1"}:
            raise ValueError(f"flip pattern must be a bit string, got {self.flips!r}")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if self.flips[0] == "1":
            object.__setattr__(self, "flips", _complement(self.flips))

    @property
    def n(self) -> int:
        return len(self.flips)


def ghz_state(n: int) -> EntangledState:
    """Fresh n-qubit GHZ state ``(|0...0> + |1...1>) / sqrt(2)``.

    n=2 is the Bell state with outcome 00, n>=3 the standard GHZ state.
    """
    if n < 2:
        raise ValueError(f"GHZ-class states need n >= 2 qubits, got {n}")
    return EntangledState(flips="0" * n, sign=1)


def apply_pauli(state: EntangledState, qubit: int, op: Pauli) -> EntangledState:
    """Apply one Pauli gate to one qubit and return the new canonical state.

    X flips the addressed bit of the flip pattern, Z flips the sign, Y does
    both (its global phase i is discarded), I is the identity.
    """
    if not 0 <= qubit < state.n:
        raise IndexError(f"qubit {qubit} out of range for {state.n}-qubit state")
    flips, sign = state.flips, state.sign
    if op in _BIT_FLIPPING:
        flipped = "1" if flips[qubit] == "0" else "0"
        flips = flips[:qubit] + flipped + flips[qubit + 1 :]
    if op in _SIGN_FLIPPING:
        sign = -sign
    return EntangledState(flips=flips, sign=sign)


def measure_entangled(state: EntangledState) -> str:
    """Entanglement measurement outcome as a bit string.

    Bit 0 is the sign indicator (0 for +, 1 for -), bits 1..n-1 are the flip
    pattern.  This is what the CNOT fan-out plus Hadamard circuit reads out:
    the CNOTs map |b> to |b0, b1^b0, ...>, collapsing both branches onto the
    same trailing bits, and the Hadamard turns the remaining (|0> + s|1>)
    qubit into |0> or |1> according to the sign.
    """
    head = "0" if state.sign == 1 else "1"
    return head + state.flips[1:]


class DecoyKind(str, enum.Enum):
    """The four decoy states used for channel checking."""

    Z0 = "Z0"  # |0>
    Z1 = "Z1"  # |1>
    XPLUS = "X+"  # |+>
    XMINUS = "X-"  # |->


_DECOY_BASIS = {
    DecoyKind.Z0: "Z",
    DecoyKind.Z1: "Z",
    DecoyKind.XPLUS: "X",
    DecoyKind.XMINUS: "X",
}
_DECOY_BIT = {
    DecoyKind.Z0: 0,
    DecoyKind.Z1: 1,
    DecoyKind.XPLUS: 0,
    DecoyKind.XMINUS: 1,
}
_DECOY_KINDS = (DecoyKind.Z0, DecoyKind.Z1, DecoyKind.XPLUS, DecoyKind.XMINUS)


@dataclass(frozen=True)
class DecoyQubit:
    """A single decoy qubit, optionally entangled with an adversary ancilla.

    ``entangled`` is set only by attack models: it holds the joint two-qubit
    state of (decoy, ancilla) after the attack, with the decoy as qubit 0.
    """

    kind: DecoyKind
    entangled: Optional[EntangledState] = None

    @property
    def basis(self) -> str:
        return _DECOY_BASIS[self.kind]

    @property
    def bit(self) -> int:
        return _DECOY_BIT[self.kind]


def random_decoy(rng: np.random.Generator) -> DecoyQubit:
    """Draw one decoy uniformly from {|0>, |1>, |+>, |->}."""
    return DecoyQubit(kind=_DECOY_KINDS[int(rng.integers(4))])


def decoy_measure(decoy: DecoyQubit, basis: str, rng: np.random.Generator) -> int:
    """Measure a decoy qubit in the Z or X basis.

    A matching basis returns the encoded bit deterministically.  A mismatched
    basis returns a uniformly random bit (Born rule on |+/-> in Z, or on
    |0/1> in X).  A decoy entangled with an ancilla is maximally mixed on its
    own, so it returns a uniform bit in every basis; this is what makes the
    CNOT attack on X-basis decoys detectable half the time.
    """
    if basis not in ("Z", "X"):
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    if decoy.entangled is not None:
        return int(rng.integers(2))
    if basis == decoy.basis:
        return decoy.bit
    return int(rng.integers(2))
