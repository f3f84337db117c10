"""Spin-1/2 chain Hilbert spaces: basis enumeration, state vectors, Pauli
actions and bipartite reduction.

Conventions (used throughout the package):

* Sites are numbered 1..n. Site ``j`` occupies bit ``j-1`` of an unsigned
  integer configuration label; bit value 1 means up/excited.
* Basis states are ordered by ascending integer encoding.
* ``sigma_z`` has eigenvalue +1 on up (bit set) and -1 on down.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import BasisMismatchError, DimensionCapError

MAX_FULL_SITES = 20
MAX_CONSTRAINED_SITES = 30


class BasisKind(enum.Enum):
    FULL = "full"
    RYDBERG_CONSTRAINED = "rydberg_constrained"


@dataclass(frozen=True)
class SpinBasis:
    """Ordered enumeration of computational basis configurations.

    ``states`` holds the integer encodings in strictly ascending order;
    ``index_of`` inverts it.
    """

    n_sites: int
    kind: BasisKind
    states: np.ndarray  # uint64, strictly ascending

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, config):
        """Map configuration integer(s) to basis ordinal(s).

        Raises KeyError if a configuration is not in the basis.
        """
        if self.kind is BasisKind.FULL:
            idx = np.asarray(config, dtype=np.int64)
            if np.any(idx < 0) or np.any(idx >= self.dim):
                raise KeyError(f"configuration {config} outside full basis")
            return int(idx) if np.isscalar(config) else idx
        idx = np.searchsorted(self.states, config)
        ok = (idx < self.dim) & (self.states[np.minimum(idx, self.dim - 1)] == config)
        if not np.all(ok):
            raise KeyError(f"configuration {config} not in constrained basis")
        return int(idx) if np.isscalar(config) else idx

    def contains(self, config) -> np.ndarray:
        """Vectorized membership test for configuration integers."""
        if self.kind is BasisKind.FULL:
            c = np.asarray(config)
            return (c >= 0) & (c < self.dim)
        idx = np.searchsorted(self.states, config)
        return (idx < self.dim) & (self.states[np.minimum(idx, self.dim - 1)] == np.asarray(config))

    def same_space(self, other: "SpinBasis") -> bool:
        return self.n_sites == other.n_sites and self.kind is other.kind


def build_full_basis(n: int) -> SpinBasis:
    """Full 2^n basis of an n-site chain."""
    if not 1 <= n <= MAX_FULL_SITES:
        raise ValueError(f"site count {n} outside [1, {MAX_FULL_SITES}]")
    states = np.arange(1 << n, dtype=np.uint64)
    return SpinBasis(n_sites=n, kind=BasisKind.FULL, states=states)


def build_constrained_basis(n: int) -> SpinBasis:
    """Open-boundary Rydberg-blockaded basis: no two adjacent up spins.

    The dimension follows the Fibonacci recurrence
    dim(n) = dim(n-1) + dim(n-2) with dim(1) = 2, dim(2) = 3.
    """
    if not 1 <= n <= MAX_CONSTRAINED_SITES:
        raise ValueError(f"site count {n} outside [1, {MAX_CONSTRAINED_SITES}]")
    # Valid length-k prefixes with bit k-1 clear extend freely; setting bit
    # k-1 requires bit k-2 clear, i.e. a valid (k-2)-prefix. Concatenation
    # preserves ascending order because the second block all exceeds 2^(k-1).
    prev2 = np.array([0, 1], dtype=np.uint64)          # n = 1
    if n == 1:
        return SpinBasis(n, BasisKind.RYDBERG_CONSTRAINED, prev2)
    prev1 = np.array([0, 1, 2], dtype=np.uint64)       # n = 2
    for k in range(3, n + 1):
        cur = np.concatenate([prev1, prev2 + np.uint64(1 << (k - 1))])
        prev2, prev1 = prev1, cur
    return SpinBasis(n, BasisKind.RYDBERG_CONSTRAINED, prev1)


@dataclass
class StateVector:
    """Complex amplitudes over a SpinBasis."""

    basis: SpinBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.basis.dim,):
            raise ValueError("amplitude length does not match basis dimension")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / n)


@dataclass
class DensityMatrix:
    """Hermitian, unit-trace, PSD matrix on a subsystem."""

    dim: int
    entries: np.ndarray

    def validate(self, tol: float = 1e-12) -> None:
        if np.max(np.abs(self.entries - self.entries.conj().T)) > tol:
            raise ValueError("density matrix not Hermitian")
        if abs(np.trace(self.entries).real - 1.0) > tol:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(self.entries).min() < -tol:
            raise ValueError("density matrix has a negative eigenvalue")


def basis_state(basis: SpinBasis, config: int) -> StateVector:
    """Computational basis state for a configuration integer."""
    amp = np.zeros(basis.dim, dtype=np.complex128)
    amp[basis.index_of(config)] = 1.0
    return StateVector(basis, amp)


class PauliAxis(enum.Enum):
    X = "x"
    Y = "y"
    Z = "z"
    PLUS = "plus"
    MINUS = "minus"


def apply_pauli(basis: SpinBasis, site: int, axis, psi: StateVector) -> StateVector:
    """Apply a single-site Pauli (or ladder) operator to a state.

    ``site`` counts from 1. On the constrained basis, amplitude produced on
    a forbidden configuration (adjacent up pair) is dropped, i.e. the result
    is projected back onto the constrained space; sigma_z never escapes.
    The result is unnormalized for ``plus``/``minus``.
    """
    if psi.basis is not basis and not psi.basis.same_space(basis):
        raise BasisMismatchError("state does not live on the given basis")
    if not 1 <= site <= basis.n_sites:
        raise ValueError(f"site {site} outside [1, {basis.n_sites}]")
    axis = PauliAxis(axis)
    bit = np.uint64(1 << (site - 1))
    states = basis.states
    up = (states & bit) != 0
    amp = psi.amplitudes

    if axis is PauliAxis.Z:
        out = np.where(up, amp, -amp)
        return StateVector(basis, out)

    flipped = states ^ bit
    out = np.zeros_like(amp)
    if axis is PauliAxis.X:
        coeff_from = np.ones(basis.dim)
        source = np.ones(basis.dim, dtype=bool)
    elif axis is PauliAxis.Y:
        # sigma_y |up> = +i |down>, sigma_y |down> = -i |up>
        coeff_from = np.where(up, 1j, -1j)
        source = np.ones(basis.dim, dtype=bool)
    elif axis is PauliAxis.PLUS:
        coeff_from = np.ones(basis.dim)
        source = ~up
    else:  # MINUS
        coeff_from = np.ones(basis.dim)
        source = up

    if basis.kind is BasisKind.FULL:
        valid = source
        tgt = flipped[valid]
    else:
        valid = source & basis.contains(flipped)
        tgt = basis.index_of(flipped[valid])
    np.add.at(out, tgt, coeff_from[valid] * amp[valid])
    return StateVector(basis, out)


def inner(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    if not a.basis.same_space(b.basis):
        raise BasisMismatchError("inner product across different bases")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def embed_in_full(psi: StateVector) -> np.ndarray:
    """Amplitudes of a constrained-basis state scattered into the full 2^n space."""
    if psi.basis.kind is BasisKind.FULL:
        return psi.amplitudes
    full = np.zeros(1 << psi.basis.n_sites, dtype=np.complex128)
    full[psi.basis.states.astype(np.int64)] = psi.amplitudes
    return full


def partial_trace(psi: StateVector, kept_sites) -> DensityMatrix:
    """Reduced density matrix over ``kept_sites`` (1-based labels).

    Constrained-basis states are embedded into the full tensor space first.
    Row/column ordering of the result follows the package bit convention
    restricted to the kept sites (smallest kept label -> bit 0).
    """
    n = psi.basis.n_sites
    kept = sorted(set(int(s) for s in kept_sites))
    if not kept:
        raise ValueError("kept_sites must be nonempty")
    if kept[0] < 1 or kept[-1] > n or len(kept) >= n:
        raise ValueError("kept_sites must be a proper subset of 1..n")
    amp = embed_in_full(psi)
    # C-order reshape puts site n on the leading axis; site j sits on axis n-j.
    arr = amp.reshape((2,) * n)
    dropped = [s for s in range(1, n + 1) if s not in kept]
    perm = [n - s for s in reversed(kept)] + [n - s for s in reversed(dropped)]
    a = arr.transpose(perm).reshape(1 << len(kept), 1 << len(dropped))
    rho = a @ a.conj().T
    return DensityMatrix(dim=1 << len(kept), entries=rho)
