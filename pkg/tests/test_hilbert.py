import string

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergoprobe.errors import BasisMismatchError
from ergoprobe.hilbert import (
    BasisKind,
    StateVector,
    apply_pauli,
    basis_state,
    build_constrained_basis,
    build_full_basis,
    embed_in_full,
    inner,
    partial_trace,
)
from tests.conftest import random_state


def fibonacci_dim(n):
    a, b = 2, 3  # dims for n=1, n=2
    if n == 1:
        return a
    for _ in range(n - 2):
        a, b = b, a + b
    return b


def brute_force_constrained(n):
    return [s for s in range(1 << n) if s & (s >> 1) == 0]


class TestBases:
    def test_full_dimensions(self):
        assert build_full_basis(1).dim == 2
        assert build_full_basis(13).dim == 8192

    def test_full_order_n2(self):
        assert list(build_full_basis(2).states) == [0, 1, 2, 3]

    def test_constrained_n3_exhaustive(self):
        b = build_constrained_basis(3)
        assert list(b.states) == brute_force_constrained(3) == [0, 1, 2, 4, 5]

    def test_constrained_n1(self):
        assert build_constrained_basis(1).dim == 2

    def test_constrained_n20_fibonacci(self):
        assert build_constrained_basis(20).dim == fibonacci_dim(20) == 17711

    @pytest.mark.parametrize("n", range(1, 13))
    def test_constrained_equals_brute_force(self, n):
        b = build_constrained_basis(n)
        assert list(b.states) == brute_force_constrained(n)
        assert b.dim == fibonacci_dim(n)

    def test_states_strictly_ascending(self):
        for b in (build_full_basis(6), build_constrained_basis(9)):
            assert np.all(np.diff(b.states.astype(np.int64)) > 0)

    def test_index_of_inverts_states(self):
        b = build_constrained_basis(10)
        idx = b.index_of(b.states)
        assert np.array_equal(idx, np.arange(b.dim))
        with pytest.raises(KeyError):
            b.index_of(3)  # adjacent pair 0b11

    def test_site_count_caps(self):
        with pytest.raises(ValueError):
            build_full_basis(0)
        with pytest.raises(ValueError):
            build_full_basis(64)


class TestPauli:
    def test_sigma_z_on_down(self):
        b = build_full_basis(1)
        psi = basis_state(b, 0)
        out = apply_pauli(b, 1, "z", psi)
        assert np.allclose(out.amplitudes, -psi.amplitudes)

    def test_sigma_x_flips_site1(self):
        b = build_full_basis(2)
        psi = basis_state(b, 1)  # site 1 up
        out = apply_pauli(b, 1, "x", psi)
        assert np.allclose(out.amplitudes, basis_state(b, 0).amplitudes)

    def test_sigma_plus_annihilates_up(self):
        b = build_full_basis(1)
        out = apply_pauli(b, 1, "plus", basis_state(b, 1))
        assert np.allclose(out.amplitudes, 0.0)

    def test_ladder_definitions(self):
        b = build_full_basis(1)
        up = basis_state(b, 1)
        down = basis_state(b, 0)
        assert np.allclose(apply_pauli(b, 1, "plus", down).amplitudes, up.amplitudes)
        assert np.allclose(apply_pauli(b, 1, "minus", up).amplitudes, down.amplitudes)
        assert np.allclose(apply_pauli(b, 1, "minus", down).amplitudes, 0.0)

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(2, 6), site=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
    def test_pauli_algebra(self, n, site, seed):
        site = min(site, n)
        b = build_full_basis(n)
        psi = random_state(b, seed)
        xy = apply_pauli(b, site, "y", psi)
        xy = apply_pauli(b, site, "x", xy)
        iz = apply_pauli(b, site, "z", psi)
        assert np.allclose(xy.amplitudes, 1j * iz.amplitudes, atol=1e-12)
        zz = apply_pauli(b, site, "z", apply_pauli(b, site, "z", psi))
        assert np.allclose(zz.amplitudes, psi.amplitudes, atol=1e-12)

    def test_site_out_of_range(self):
        b = build_full_basis(3)
        with pytest.raises(ValueError):
            apply_pauli(b, 4, "x", basis_state(b, 0))

    def test_constrained_projection_drops_escaping_amplitude(self):
        b = build_constrained_basis(3)
        psi = basis_state(b, 0b001)  # site 1 up
        out = apply_pauli(b, 2, "x", psi)  # would produce 0b011, forbidden
        assert np.allclose(out.amplitudes, 0.0)

    def test_constrained_sigma_z_never_escapes(self):
        b = build_constrained_basis(5)
        psi = random_state(b, 3)
        out = apply_pauli(b, 3, "z", psi)
        assert abs(out.norm() - 1.0) < 1e-12


class TestInner:
    def test_norm_one(self):
        psi = random_state(build_full_basis(4), 7)
        assert abs(inner(psi, psi) - 1.0) < 1e-12

    def test_orthogonal_computational_states(self):
        b = build_full_basis(3)
        assert inner(basis_state(b, 1), basis_state(b, 5)) == 0

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_conjugate_symmetry(self, seed):
        b = build_full_basis(5)
        a = random_state(b, seed)
        c = random_state(b, seed + 1)
        assert abs(inner(a, c) - np.conj(inner(c, a))) < 1e-14

    def test_basis_mismatch(self):
        a = random_state(build_full_basis(3), 0)
        c = random_state(build_full_basis(4), 0)
        with pytest.raises(BasisMismatchError):
            inner(a, c)


def oracle_partial_trace(amp_full, n, kept):
    """Independent route: full density matrix, einsum trace over dropped axes."""
    rho = np.outer(amp_full, amp_full.conj()).reshape((2,) * (2 * n))
    kept_desc = sorted(kept, reverse=True)
    dropped = [s for s in range(1, n + 1) if s not in kept]
    letters = string.ascii_letters
    sub = [""] * (2 * n)
    out = []
    li = 0
    for s in kept_desc:
        sub[n - s] = letters[li]
        out.append(letters[li])
        li += 1
    for s in kept_desc:
        sub[2 * n - s] = letters[li]
        out.append(letters[li])
        li += 1
    for s in dropped:
        sub[n - s] = letters[li]
        sub[2 * n - s] = letters[li]
        li += 1
    reduced = np.einsum("".join(sub) + "->" + "".join(out), rho)
    k = len(kept)
    return reduced.reshape(1 << k, 1 << k)


class TestPartialTrace:
    def test_product_state_is_pure(self):
        b = build_full_basis(2)
        psi = basis_state(b, 1)  # site1 up, site2 down
        rho = partial_trace(psi, [1])
        assert np.allclose(rho.entries, [[0, 0], [0, 1]])  # index 1 = up

    def test_bell_state_maximally_mixed(self):
        b = build_full_basis(2)
        amp = np.zeros(4, dtype=complex)
        amp[1] = amp[2] = 1 / np.sqrt(2)
        rho = partial_trace(StateVector(b, amp), [1])
        assert np.allclose(rho.entries, np.eye(2) / 2, atol=1e-14)

    def test_trace_one(self):
        b = build_full_basis(5)
        psi = random_state(b, 11)
        rho = partial_trace(psi, [1, 2, 3, 4])
        assert abs(np.trace(rho.entries).real - 1.0) < 1e-12

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_all_bipartitions_against_dense_oracle(self, n):
        from itertools import combinations

        b = build_full_basis(n)
        psi = random_state(b, 100 + n)
        sites = range(1, n + 1)
        for k in range(1, n):
            for kept in combinations(sites, k):
                rho = partial_trace(psi, list(kept))
                expected = oracle_partial_trace(psi.amplitudes, n, list(kept))
                assert np.allclose(rho.entries, expected, atol=1e-12)
                rho.validate(tol=1e-10)

    def test_sampled_bipartitions_n8(self):
        n = 8
        b = build_full_basis(n)
        psi = random_state(b, 108)
        rng = np.random.default_rng(n)
        for _ in range(12):
            k = int(rng.integers(1, n))
            kept = sorted(rng.choice(np.arange(1, n + 1), size=k, replace=False).tolist())
            rho = partial_trace(psi, kept)
            expected = oracle_partial_trace(psi.amplitudes, n, kept)
            assert np.allclose(rho.entries, expected, atol=1e-12)
            rho.validate(tol=1e-10)

    def test_constrained_state_embedding(self):
        b = build_constrained_basis(4)
        psi = random_state(b, 5)
        full = embed_in_full(psi)
        assert abs(np.linalg.norm(full) - 1.0) < 1e-12
        rho = partial_trace(psi, [2, 3])
        expected = oracle_partial_trace(full, 4, [2, 3])
        assert np.allclose(rho.entries, expected, atol=1e-12)

    def test_invalid_site_sets(self):
        b = build_full_basis(3)
        psi = random_state(b, 1)
        with pytest.raises(ValueError):
            partial_trace(psi, [])
        with pytest.raises(ValueError):
            partial_trace(psi, [1, 2, 3])
        with pytest.raises(ValueError):
            partial_trace(psi, [0, 1])
