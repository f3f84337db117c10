"""Eigenbasis time evolution and time-domain observables.

Traces are evaluated in the eigenbasis in blocks of time points so the hot
loop is a GEMM. Real eigenvector matrices (the generic case here) are
multiplied against complex phase blocks as two real GEMMs.

Long-time fluctuations come in two modes: the temporal variance of the
expectation value around its time average (default, the quantity entering
the fluctuation-dissipation scaling), and the time-averaged quantum
variance <O^2> - <O>^2. The temporal mode also carries the exact
infinite-horizon closed form sum_{mu != nu} |a_mu|^2 |a_nu|^2 |O_mu,nu|^2.
"""

from __future__ import annotations

import csv
import enum
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BasisMismatchError
from .hilbert import StateVector, partial_trace
from .models import HamiltonianMatrix
from .spectra import EigenSystem, dos_at_energy

DEFAULT_FLUCTUATION_SAMPLES = 4096
_BLOCK = 256


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing, nonnegative times (inverse-energy units)."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", p)
        if len(p) == 0 or p[0] < 0 or np.any(np.diff(p) <= 0):
            raise ValueError("time grid must be strictly increasing and start >= 0")

    @staticmethod
    def linear(t_max: float, n: int, t_min: float = 0.0) -> "TimeGrid":
        return TimeGrid(np.linspace(t_min, t_max, n))

    @staticmethod
    def logarithmic(t_min: float, t_max: float, n: int) -> "TimeGrid":
        return TimeGrid(np.geomspace(t_min, t_max, n))

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class ObservableTrace:
    grid: TimeGrid
    values: np.ndarray
    tag: str = ""


class FluctuationMode(enum.Enum):
    TEMPORAL_VARIANCE = "temporal_variance"
    QUANTUM_VARIANCE = "quantum_variance"


@dataclass
class FluctuationResult:
    mode: FluctuationMode
    value: float
    horizon: float
    closed_form: Optional[float] = None


def _operator_entries(o) -> np.ndarray:
    return o.entries if isinstance(o, HamiltonianMatrix) else np.asarray(o)


def _check_same_basis(es: EigenSystem, psi: StateVector) -> None:
    if es.basis is not None and not es.basis.same_space(psi.basis):
        raise BasisMismatchError("state and eigensystem bases differ")


def _real_matmul_complex(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a @ b with real a and complex b via two real GEMMs."""
    if np.isrealobj(a) and np.iscomplexobj(b):
        return (a @ b.real) + 1j * (a @ b.imag)
    return a @ b


def eigenbasis_amplitudes(es: EigenSystem, psi: StateVector) -> np.ndarray:
    """Components a_mu = <psi_mu | psi> of a state in the eigenbasis."""
    _check_same_basis(es, psi)
    v = es.vectors
    amp = psi.amplitudes
    if np.isrealobj(v):
        return (v.T @ amp.real) + 1j * (v.T @ amp.imag)
    return v.conj().T @ amp


def _diagonal_or_none(m: np.ndarray) -> Optional[np.ndarray]:
    d = np.diagonal(m)
    if np.count_nonzero(m) == np.count_nonzero(d):
        return d.real if np.max(np.abs(d.imag), initial=0.0) == 0.0 else None
    return None


def propagate(es: EigenSystem, psi0: StateVector, t: float) -> StateVector:
    """Evolve psi0 by exp(-iHt) via the eigenbasis."""
    a = eigenbasis_amplitudes(es, psi0)
    rotated = a * np.exp(-1j * es.energies * t)
    return StateVector(psi0.basis, _real_matmul_complex(es.vectors, rotated))


def expval(psi: StateVector, o) -> float:
    """<psi|O|psi> for Hermitian O; the imaginary part is asserted small."""
    m = _operator_entries(o)
    if isinstance(o, HamiltonianMatrix) and not o.basis.same_space(psi.basis):
        raise BasisMismatchError("operator and state bases differ")
    val = np.vdot(psi.amplitudes, m @ psi.amplitudes)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def _phase_block(a: np.ndarray, energies: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Eigenbasis amplitudes at each time: a_mu exp(-i E_mu t_k), shape (dim, K)."""
    return a[:, None] * np.exp(-1j * np.outer(energies, times))


def expectation_trace(es: EigenSystem, psi0: StateVector, o, grid: TimeGrid,
                      o_eig: Optional[np.ndarray] = None, tag: str = "") -> ObservableTrace:
    """<O(t)> on the grid.

    Diagonal observables (in the computational basis) avoid any cubic-cost
    transformation; otherwise pass `o_eig` = V^dag O V to reuse it across
    calls, or it is computed here.
    """
    m = _operator_entries(o) if o_eig is None else None
    a = eigenbasis_amplitudes(es, psi0)
    times = grid.points
    out = np.empty(len(times))
    diag = _diagonal_or_none(m) if (m is not None) else None
    if diag is not None:
        v = es.vectors
        for k0 in range(0, len(times), _BLOCK):
            blk = times[k0:k0 + _BLOCK]
            psi_t = _real_matmul_complex(v, _phase_block(a, es.energies, blk))
            out[k0:k0 + len(blk)] = diag @ (psi_t.real ** 2 + psi_t.imag ** 2)
        return ObservableTrace(grid, out, tag)
    if o_eig is None:
        o_eig = operator_in_eigenbasis(es, m)
    for k0 in range(0, len(times), _BLOCK):
        blk = times[k0:k0 + _BLOCK]
        phi = _phase_block(a, es.energies, blk)
        x = o_eig @ phi
        out[k0:k0 + len(blk)] = np.einsum("ik,ik->k", phi.conj(), x).real
    return ObservableTrace(grid, out, tag)


def operator_in_eigenbasis(es: EigenSystem, o) -> np.ndarray:
    """V^dag O V (dense; cubic cost, one GEMM for diagonal O)."""
    m = _operator_entries(o)
    v = es.vectors
    d = _diagonal_or_none(m)
    if d is not None and np.isrealobj(v):
        return (v * d[:, None]).T @ v
    if np.isrealobj(v) and np.isrealobj(m):
        return v.T @ m @ v
    return v.conj().T @ m @ v


def survival_probability(es: EigenSystem, psi0: StateVector, grid: TimeGrid) -> ObservableTrace:
    """F(t) = |sum_mu |a_mu|^2 exp(-i E_mu t)|^2; F(0) = 1."""
    a = eigenbasis_amplitudes(es, psi0)
    w = (a.real ** 2 + a.imag ** 2)
    times = grid.points
    out = np.empty(len(times))
    for k0 in range(0, len(times), _BLOCK):
        blk = times[k0:k0 + _BLOCK]
        amp = w @ np.exp(-1j * np.outer(es.energies, blk))
        out[k0:k0 + len(blk)] = amp.real ** 2 + amp.imag ** 2
    return ObservableTrace(grid, out, "survival")


def subsystem_entropy(rho_entries: np.ndarray) -> float:
    """Von Neumann entropy -Tr(rho ln rho); eigenvalues below 1e-14 contribute 0."""
    p = np.linalg.eigvalsh(rho_entries)
    p = p[p > 1e-14]
    return float(-(p * np.log(p)).sum())


def entropy_trace(es: EigenSystem, psi0: StateVector, grid: TimeGrid,
                  kept_sites) -> ObservableTrace:
    """Entanglement entropy of the kept sites along the evolution (natural log)."""
    a = eigenbasis_amplitudes(es, psi0)
    times = grid.points
    out = np.empty(len(times))
    v = es.vectors
    basis = psi0.basis
    for k0 in range(0, len(times), _BLOCK):
        blk = times[k0:k0 + _BLOCK]
        psi_t = _real_matmul_complex(v, _phase_block(a, es.energies, blk))
        for j in range(len(blk)):
            rho = partial_trace(StateVector(basis, psi_t[:, j]), kept_sites)
            out[k0 + j] = subsystem_entropy(rho.entries)
    return ObservableTrace(grid, out, "entropy")


def diagonal_ensemble_mean(es: EigenSystem, psi0: StateVector, o) -> float:
    """Infinite-time average sum_mu |a_mu|^2 O_mu,mu (non-degenerate spectra)."""
    a = eigenbasis_amplitudes(es, psi0)
    w = a.real ** 2 + a.imag ** 2
    m = _operator_entries(o)
    diag = _diagonal_or_none(m)
    v = es.vectors
    if diag is not None and np.isrealobj(v):
        return float(diag @ ((v * v) @ w))
    o_mu = np.einsum("im,im->m", v.conj(), m @ v).real
    return float(w @ o_mu)


def fluctuation_closed_form(es: EigenSystem, psi0: StateVector, o,
                            o_eig: Optional[np.ndarray] = None) -> float:
    """Exact infinite-horizon temporal variance for non-degenerate gaps:
    sum_{mu != nu} |a_mu|^2 |a_nu|^2 |O_mu,nu|^2.

    Diagonal observables with real eigenvectors use a single real GEMM via
    the diagonal-ensemble matrix G = V diag(w) V^T: the total weighted sum
    equals sum_ij d_i d_j G_ij^2.
    """
    a = eigenbasis_amplitudes(es, psi0)
    w = a.real ** 2 + a.imag ** 2
    v = es.vectors
    m = _operator_entries(o) if o_eig is None else None
    diag = _diagonal_or_none(m) if m is not None else None
    if diag is not None and np.isrealobj(v):
        g = (v * w) @ v.T
        o_diag = (v * v).T @ diag  # O_mu,mu
        np.square(g, out=g)
        total = float(diag @ g @ diag)
        del g
        return total - float(np.sum((w * o_diag) ** 2))
    if o_eig is None:
        o_eig = operator_in_eigenbasis(es, m)
    k = (o_eig.real ** 2 + o_eig.imag ** 2) if np.iscomplexobj(o_eig) else o_eig ** 2
    total = float(w @ k @ w)
    return total - float(np.sum(w * w * np.diagonal(k)))


def long_time_fluctuations(es: EigenSystem, psi0: StateVector, o,
                           mode: FluctuationMode = FluctuationMode.TEMPORAL_VARIANCE,
                           horizon: Optional[float] = None,
                           n_samples: int = DEFAULT_FLUCTUATION_SAMPLES,
                           o_eig: Optional[np.ndarray] = None) -> FluctuationResult:
    """Long-time fluctuations of <O(t)> over [0, T].

    Default horizon is 20x the Heisenberg-time estimate (density of states
    at the state energy). Averages use the trapezoid rule on a uniform grid.
    """
    a = eigenbasis_amplitudes(es, psi0)
    w = a.real ** 2 + a.imag ** 2
    e0 = float(w @ es.energies)
    if horizon is None:
        horizon = 20.0 * dos_at_energy(es, e0).value
    width = float(es.energies[-1] - es.energies[0])
    if width > 0 and horizon < 10.0 * es.dim / width:
        warnings.warn("averaging horizon is short compared to the inverse mean level spacing")
    grid = TimeGrid.linear(horizon, n_samples)
    vals = expectation_trace(es, psi0, o, grid, o_eig=o_eig).values
    t = grid.points
    if mode is FluctuationMode.TEMPORAL_VARIANCE:
        mean = np.trapezoid(vals, t) / horizon
        var = np.trapezoid((vals - mean) ** 2, t) / horizon
        closed = fluctuation_closed_form(es, psi0, o, o_eig=o_eig)
        return FluctuationResult(mode, float(var), horizon, closed)
    m = _operator_entries(o)
    diag = _diagonal_or_none(m)
    if diag is not None:
        o2 = np.diag(diag * diag)
    else:
        o2 = m @ m
    vals2 = expectation_trace(es, psi0, o2, grid).values
    qvar = np.trapezoid(vals2 - vals ** 2, t) / horizon
    return FluctuationResult(mode, float(qvar), horizon, None)


def write_trace_csv(trace: ObservableTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "value"])
        for t, v in zip(trace.grid.points, trace.values):
            wr.writerow([repr(float(t)), repr(float(v))])


def write_fluctuation_csv(result: FluctuationResult, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["mode", "T", "value", "closed_form"])
        cf = "" if result.closed_form is None else repr(float(result.closed_form))
        wr.writerow([result.mode.value, repr(float(result.horizon)),
                     repr(float(result.value)), cf])
