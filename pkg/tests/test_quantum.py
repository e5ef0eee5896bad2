"""GHZ-class state mechanics against the dense statevector oracle."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qgka.quantum import (
    DecoyKind,
    DecoyQubit,
    EntangledState,
    Pauli,
    apply_pauli,
    decoy_measure,
    ghz_state,
    measure_entangled,
)

from oracle import apply_dense, dense_of, equal_up_to_phase, oracle_measure

PAULIS = [Pauli.I, Pauli.X, Pauli.Y, Pauli.Z]

# The four Bell states and their measurement readouts.
BELL_TABLE = [
    (EntangledState("00", 1), "00"),   # (|00> + |11>)/sqrt2
    (EntangledState("00", -1), "10"),  # (|00> - |11>)/sqrt2
    (EntangledState("01", 1), "01"),   # (|01> + |10>)/sqrt2
    (EntangledState("01", -1), "11"),  # (|01> - |10>)/sqrt2
]

# The eight three-qubit GHZ-class states and their readouts.
GHZ3_TABLE = [
    (EntangledState("000", 1), "000"),
    (EntangledState("000", -1), "100"),
    (EntangledState("001", 1), "001"),
    (EntangledState("001", -1), "101"),
    (EntangledState("010", 1), "010"),
    (EntangledState("010", -1), "110"),
    (EntangledState("011", 1), "011"),
    (EntangledState("011", -1), "111"),
]


class TestConstruction:
    def test_fresh_states(self):
        assert ghz_state(2) == EntangledState("00", 1)
        assert ghz_state(3) == EntangledState("000", 1)
        assert ghz_state(10).flips == "0" * 10

    def test_too_small(self):
        with pytest.raises(ValueError):
            ghz_state(1)
        with pytest.raises(ValueError):
            ghz_state(0)

    def test_canonicalization_complements_leading_one(self):
        assert EntangledState("10", 1) == EntangledState("01", 1)
        assert EntangledState("110", -1) == EntangledState("001", -1)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            EntangledState("0a", 1)
        with pytest.raises(ValueError):
            EntangledState("00", 2)


class TestMeasurement:
    @pytest.mark.parametrize("state,expected", BELL_TABLE)
    def test_bell_readout(self, state, expected):
        assert measure_entangled(state) == expected

    @pytest.mark.parametrize("state,expected", GHZ3_TABLE)
    def test_ghz3_readout(self, state, expected):
        assert measure_entangled(state) == expected

    def test_readout_is_a_bijection(self):
        # every canonical state maps to a distinct outcome, both arities
        for table, n in ((BELL_TABLE, 2), (GHZ3_TABLE, 3)):
            outcomes = [measure_entangled(s) for s, _ in table]
            assert sorted(outcomes) == sorted(
                format(i, f"0{n}b") for i in range(2**n)
            )

    @pytest.mark.parametrize("n", [2, 3, 4, 7])
    def test_fresh_state_measures_all_zero(self, n):
        assert measure_entangled(ghz_state(n)) == "0" * n

    @pytest.mark.parametrize("state,_", BELL_TABLE + GHZ3_TABLE)
    def test_readout_matches_dense_oracle(self, state, _):
        assert measure_entangled(state) == oracle_measure(dense_of(state), state.n)


class TestPauli:
    def test_x_on_leader_qubit_of_ghz3(self):
        # the state measuring |011> after X on qubit 0 of a fresh GHZ
        state = apply_pauli(ghz_state(3), 0, Pauli.X)
        assert measure_entangled(state) == "011"

    def test_z_turns_plus_bell_into_minus(self):
        # derived with the dense oracle below; frozen expectation here
        state = apply_pauli(ghz_state(2), 0, Pauli.Z)
        assert state == EntangledState("00", -1)
        vec = apply_dense(dense_of(ghz_state(2)), 2, 0, Pauli.Z)
        assert equal_up_to_phase(vec, dense_of(state))

    def test_identity_is_identity(self):
        for state, _ in BELL_TABLE + GHZ3_TABLE:
            for q in range(state.n):
                assert apply_pauli(state, q, Pauli.I) == state

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            apply_pauli(ghz_state(2), 2, Pauli.X)
        with pytest.raises(IndexError):
            apply_pauli(ghz_state(3), -1, Pauli.Z)

    @given(
        n=st.integers(2, 4),
        ops=st.lists(
            st.tuples(st.integers(0, 3), st.sampled_from(PAULIS)), max_size=12
        ),
    )
    def test_random_sequences_agree_with_dense_oracle(self, n, ops):
        state = ghz_state(n)
        vec = dense_of(state)
        for qubit, op in ops:
            qubit %= n
            state = apply_pauli(state, qubit, op)
            vec = apply_dense(vec, n, qubit, op)
        assert equal_up_to_phase(vec, dense_of(state))
        assert measure_entangled(state) == oracle_measure(vec, n)

    @given(
        n=st.integers(2, 5),
        qubit=st.integers(0, 4),
        op=st.sampled_from(PAULIS),
        flips=st.integers(0, 15),
        sign=st.sampled_from([1, -1]),
    )
    def test_every_op_is_self_inverse(self, n, qubit, op, flips, sign):
        qubit %= n
        state = EntangledState(format(flips % 2**n, f"0{n}b"), sign)
        assert apply_pauli(apply_pauli(state, qubit, op), qubit, op) == state

    @given(
        n=st.integers(2, 5),
        q1=st.integers(0, 4),
        q2=st.integers(0, 4),
        op1=st.sampled_from(PAULIS),
        op2=st.sampled_from(PAULIS),
    )
    def test_ops_on_distinct_qubits_commute(self, n, q1, q2, op1, op2):
        q1, q2 = q1 % n, q2 % n
        if q1 == q2:
            return
        a = apply_pauli(apply_pauli(ghz_state(n), q1, op1), q2, op2)
        b = apply_pauli(apply_pauli(ghz_state(n), q2, op2), q1, op1)
        assert measure_entangled(a) == measure_entangled(b)


class TestDecoys:
    def test_matching_basis_is_deterministic(self, rng):
        assert decoy_measure(DecoyQubit(DecoyKind.Z0), "Z", rng) == 0
        assert decoy_measure(DecoyQubit(DecoyKind.Z1), "Z", rng) == 1
        assert decoy_measure(DecoyQubit(DecoyKind.XPLUS), "X", rng) == 0
        assert decoy_measure(DecoyQubit(DecoyKind.XMINUS), "X", rng) == 1

    def test_bad_basis(self, rng):
        with pytest.raises(ValueError):
            decoy_measure(DecoyQubit(DecoyKind.Z0), "Y", rng)

    def test_mismatched_basis_is_unbiased(self, rng):
        trials = 20_000
        ones = sum(
            decoy_measure(DecoyQubit(DecoyKind.XPLUS), "Z", rng)
            for _ in range(trials)
        )
        assert abs(ones / trials - 0.5) < 0.02

    def test_entangled_decoy_is_uniform_even_in_matching_basis(self, rng):
        from qgka.quantum import EntangledState

        pair = EntangledState("00", 1)
        tagged = DecoyQubit(DecoyKind.XPLUS, entangled=pair)
        trials = 20_000
        ones = sum(decoy_measure(tagged, "X", rng) for _ in range(trials))
        assert abs(ones / trials - 0.5) < 0.02
