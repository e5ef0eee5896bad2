"""Dense statevector oracle used only by the tests.

Independent of the compact flip/sign representation: states are full 2^n
complex vectors, gates are literal Pauli matrices, and the measurement
outcome is read off the support of the vector.  Qubit 0 is the most
significant bit of the basis index, matching the bit-string convention of
the package.
"""

from __future__ import annotations

import numpy as np

from qgka.quantum import EntangledState, Pauli

_MATRICES = {
    Pauli.I: np.eye(2, dtype=complex),
    Pauli.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Pauli.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    Pauli.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}


def dense_vector(flips: str, sign: int) -> np.ndarray:
    """Statevector of (|flips> + sign * |~flips>) / sqrt(2)."""
    n = len(flips)
    vec = np.zeros(2**n, dtype=complex)
    idx = int(flips, 2)
    comp = idx ^ (2**n - 1)
    vec[idx] = 1 / np.sqrt(2)
    vec[comp] = sign / np.sqrt(2)
    return vec


def dense_of(state: EntangledState) -> np.ndarray:
    return dense_vector(state.flips, state.sign)


def apply_dense(vec: np.ndarray, n: int, qubit: int, op: Pauli) -> np.ndarray:
    mats = [_MATRICES[Pauli.I]] * n
    mats[qubit] = _MATRICES[op]
    full = mats[0]
    for m in mats[1:]:
        full = np.kron(full, m)
    return full @ vec

def equal_up_to_phase(u: np.ndarray, v: np.ndarray) -> bool:
    return bool(np.isclose(abs(np.vdot(u, v)), 1.0, atol=1e-12))


def oracle_measure(vec: np.ndarray, n: int) -> str:
    """Measurement outcome derived straight from the dense amplitudes."""
    support = np.flatnonzero(~np.isclose(vec, 0.0, atol=1e-12))
    assert len(support) == 2, "state left the GHZ-class family"
    lo, hi = sorted(support)
    assert lo ^ hi == 2**n - 1, "support is not a complementary pair"
    rel = vec[hi] / vec[lo]
    assert np.isclose(rel, 1.0, atol=1e-12) or np.isclose(rel, -1.0, atol=1e-12)
    sign = 1 if np.isclose(rel, 1.0, atol=1e-12) else -1
    flips = format(lo, f"0{n}b")
    head = "0" if sign == 1 else "1"
    return head + flips[1:]
