"""Hamiltonian builders for the three scenario families.

Spin-chain scenarios live on the full basis: a probe spin on site 1 in a z
field, a transverse-field XX bath on sites 2..N, a probe-bath contact at
site r, and optionally on-site z disorder. The scar scenario is the
kinetically constrained flip model (projector-dressed sigma_x, open
boundaries) with an optional probe z field on site 1.

All builders emit real symmetric matrices; `assemble` revalidates
Hermiticity after summing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BasisMismatchError
from .hilbert import BasisKind, SpinBasis, build_constrained_basis, build_full_basis

HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class SpinChainParams:
    """Couplings of the probe + bath + contact (+ disorder) spin chain."""

    n_sites: int
    b_probe: float = 0.01
    bx_bath: float = 0.3
    jx_bath: float = 1.0
    jz_sb: float = 0.2
    jx_sb: float = 0.4
    contact_site: Optional[int] = None  # defaults to min(5, n_sites)
    w_disorder: float = 0.0
    disorder_seed: int = 0

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("need at least 2 sites")
        if self.contact_site is None:
            object.__setattr__(self, "contact_site", min(5, self.n_sites))
        if not 2 <= self.contact_site <= self.n_sites:
            raise ValueError(f"contact site {self.contact_site} outside [2, {self.n_sites}]")
        if self.w_disorder < 0:
            raise ValueError("disorder half-width must be >= 0")


@dataclass(frozen=True)
class PXPParams:
    """Constrained flip model with a probe z field on site 1, open boundaries."""

    n_sites: int
    b_probe: float = 0.0

    def __post_init__(self):
        if self.n_sites < 3:
            raise ValueError("need at least 3 sites")


@dataclass
class HamiltonianMatrix:
    """Dense Hermitian operator on a SpinBasis with provenance tag."""

    basis: SpinBasis
    entries: np.ndarray
    tag: str
    params: Optional[object] = None

    def __post_init__(self):
        if self.entries.shape != (self.basis.dim, self.basis.dim):
            raise ValueError("matrix shape does not match basis dimension")
        dev = hermiticity_deviation(self.entries)
        if dev > HERMITICITY_TOL:
            raise ValueError(f"matrix not Hermitian (max deviation {dev:.3e})")

    @property
    def dim(self) -> int:
        return self.basis.dim


def hermiticity_deviation(m: np.ndarray) -> float:
    if np.isrealobj(m):
        return float(np.max(np.abs(m - m.T)))
    return float(np.max(np.abs(m - m.conj().T)))


@dataclass(frozen=True)
class DisorderRealization:
    """One draw of on-site fields, reproducible from its seed.

    The unit draws u_i are uniform on [-1, 1]; fields are W * u_i so the
    same landscape rescales across a disorder-strength scan.
    """

    seed: int
    fields: np.ndarray


def _zero(basis: SpinBasis) -> np.ndarray:
    return np.zeros((basis.dim, basis.dim), dtype=np.float64)


def _z_values(basis: SpinBasis, site: int) -> np.ndarray:
    """sigma_z eigenvalues (+1 up / -1 down) per basis state."""
    bit = np.uint64(1 << (site - 1))
    return np.where((basis.states & bit) != 0, 1.0, -1.0)


def _add_flip(h: np.ndarray, basis: SpinBasis, site: int, coeff: float,
              allowed: Optional[np.ndarray] = None) -> None:
    """Add coeff * sigma_x on `site`, restricted to rows where `allowed`."""
    bit = np.uint64(1 << (site - 1))
    src = np.arange(basis.dim) if allowed is None else np.flatnonzero(allowed)
    flipped = basis.states[src] ^ bit
    tgt = basis.index_of(flipped) if basis.kind is BasisKind.RYDBERG_CONSTRAINED \
        else flipped.astype(np.int64)
    h[tgt, src] += coeff


def _add_hop(h: np.ndarray, basis: SpinBasis, p: int, q: int, coeff: float) -> None:
    """Add coeff * (sigma+_p sigma-_q + sigma-_p sigma+_q) on the full basis."""
    bp = np.uint64(1 << (p - 1))
    bq = np.uint64(1 << (q - 1))
    states = basis.states
    src = np.flatnonzero(((states & bq) != 0) & ((states & bp) == 0))
    tgt = (states[src] ^ (bp | bq)).astype(np.int64)
    h[tgt, src] += coeff
    h[src, tgt] += coeff


def build_probe(params: SpinChainParams, basis: Optional[SpinBasis] = None) -> HamiltonianMatrix:
    """Probe field B * sigma_z on site 1."""
    basis = basis or build_full_basis(params.n_sites)
    h = _zero(basis)
    d = params.b_probe * _z_values(basis, 1)
    h[np.diag_indices(basis.dim)] = d
    return HamiltonianMatrix(basis, h, "probe", params)


def build_bath(params: SpinChainParams, basis: Optional[SpinBasis] = None) -> HamiltonianMatrix:
    """Transverse field on sites 2..N plus XX hopping on bonds (k, k+1), k >= 2."""
    basis = basis or build_full_basis(params.n_sites)
    h = _zero(basis)
    for k in range(2, params.n_sites + 1):
        if params.bx_bath != 0.0:
            _add_flip(h, basis, k, params.bx_bath)
    for k in range(2, params.n_sites):
        if params.jx_bath != 0.0:
            _add_hop(h, basis, k, k + 1, params.jx_bath)
    return HamiltonianMatrix(basis, h, "bath", params)


def build_coupling(params: SpinChainParams, basis: Optional[SpinBasis] = None) -> HamiltonianMatrix:
    """Probe-bath contact: Jz sigma_z1 sigma_zr + Jx (sigma+_1 sigma-_r + h.c.)."""
    basis = basis or build_full_basis(params.n_sites)
    h = _zero(basis)
    if params.jz_sb != 0.0:
        d = params.jz_sb * _z_values(basis, 1) * _z_values(basis, params.contact_site)
        h[np.diag_indices(basis.dim)] += d
    if params.jx_sb != 0.0:
        _add_hop(h, basis, 1, params.contact_site, params.jx_sb)
    return HamiltonianMatrix(basis, h, "coupling", params)


def draw_disorder(params: SpinChainParams) -> DisorderRealization:
    """Fields D_i ~ U[-W, W] on all N sites from a counter-based RNG keyed by
    the realization seed; unit draws are consumed in site order so
    realizations are schedule-independent."""
    rng = np.random.Generator(np.random.Philox(key=params.disorder_seed))
    units = rng.uniform(-1.0, 1.0, size=params.n_sites)
    return DisorderRealization(seed=params.disorder_seed,
                               fields=params.w_disorder * units)


def build_disorder(params: SpinChainParams, basis: Optional[SpinBasis] = None):
    """Disorder Hamiltonian sum_i D_i sigma_z_i (probe site included).

    Returns (DisorderRealization, HamiltonianMatrix).
    """
    basis = basis or build_full_basis(params.n_sites)
    real = draw_disorder(params)
    fields = real.fields
    h = _zero(basis)
    d = np.zeros(basis.dim)
    for i in range(1, params.n_sites + 1):
        d += fields[i - 1] * _z_values(basis, i)
    h[np.diag_indices(basis.dim)] = d
    return real, HamiltonianMatrix(basis, h, "disorder", params)


def build_bath_alone(params: SpinChainParams,
                     disorder_fields: Optional[np.ndarray] = None) -> HamiltonianMatrix:
    """The bath as a standalone (N-1)-site chain: transverse field on every
    site, hopping on every bond, plus optional z fields (disorder on sites
    2..N of the parent chain, passed as a length N-1 vector)."""
    m = params.n_sites - 1
    basis = build_full_basis(m)
    h = _zero(basis)
    for k in range(1, m + 1):
        if params.bx_bath != 0.0:
            _add_flip(h, basis, k, params.bx_bath)
    for k in range(1, m):
        if params.jx_bath != 0.0:
            _add_hop(h, basis, k, k + 1, params.jx_bath)
    if disorder_fields is not None:
        if len(disorder_fields) != m:
            raise ValueError("need one field per bath site")
        d = np.zeros(basis.dim)
        for k in range(1, m + 1):
            if disorder_fields[k - 1] != 0.0:
                d += disorder_fields[k - 1] * _z_values(basis, k)
        h[np.diag_indices(basis.dim)] += d
    return HamiltonianMatrix(basis, h, "bath_alone", params)


def build_pxp(params: PXPParams, basis: Optional[SpinBasis] = None) -> HamiltonianMatrix:
    """Constrained flip Hamiltonian with open boundaries.

    Site i flips only when every existing neighbor is down; boundary sites
    require only their single neighbor down. The action is exactly closed on
    the constrained basis.
    """
    basis = basis or build_constrained_basis(params.n_sites)
    if basis.kind is not BasisKind.RYDBERG_CONSTRAINED:
        raise BasisMismatchError("constrained basis required")
    n = params.n_sites
    h = _zero(basis)
    states = basis.states
    for i in range(1, n + 1):
        neighbors_down = np.ones(basis.dim, dtype=bool)
        if i > 1:
            neighbors_down &= (states & np.uint64(1 << (i - 2))) == 0
        if i < n:
            neighbors_down &= (states & np.uint64(1 << i)) == 0
        _add_flip(h, basis, i, 1.0, allowed=neighbors_down)
    return HamiltonianMatrix(basis, h, "pxp", params)


def build_qmbs(params: PXPParams, basis: Optional[SpinBasis] = None) -> HamiltonianMatrix:
    """Constrained flip model plus probe field B * sigma_z on site 1."""
    basis = basis or build_constrained_basis(params.n_sites)
    ham = build_pxp(params, basis)
    ham.entries[np.diag_indices(basis.dim)] += params.b_probe * _z_values(basis, 1)
    ham.tag = "qmbs"
    return ham


def site_operator(basis: SpinBasis, site: int, axis: str) -> HamiltonianMatrix:
    """Dense single-site sigma_x or sigma_z matrix.

    On the constrained basis the x operator is projector-dressed: matrix
    elements to forbidden configurations are absent.
    """
    if not 1 <= site <= basis.n_sites:
        raise ValueError(f"site {site} outside [1, {basis.n_sites}]")
    h = _zero(basis)
    if axis == "z":
        h[np.diag_indices(basis.dim)] = _z_values(basis, site)
    elif axis == "x":
        bit = np.uint64(1 << (site - 1))
        flipped = basis.states ^ bit
        if basis.kind is BasisKind.RYDBERG_CONSTRAINED:
            ok = basis.contains(flipped)
            src = np.flatnonzero(ok)
            h[basis.index_of(flipped[src]), src] = 1.0
        else:
            h[flipped.astype(np.int64), np.arange(basis.dim)] = 1.0
    else:
        raise ValueError("axis must be 'x' or 'z'")
    return HamiltonianMatrix(basis, h, f"sigma_{axis}_{site}")


def assemble(terms) -> HamiltonianMatrix:
    """Sum Hamiltonian terms sharing one basis; Hermiticity is revalidated."""
    terms = list(terms)
    if not terms:
        raise ValueError("nothing to assemble")
    basis = terms[0].basis
    for t in terms[1:]:
        if not t.basis.same_space(basis):
            raise BasisMismatchError("terms live on different bases")
    total = terms[0].entries.copy()
    for t in terms[1:]:
        total += t.entries
    tag = "+".join(t.tag for t in terms)
    return HamiltonianMatrix(basis, total, tag, terms[0].params)
