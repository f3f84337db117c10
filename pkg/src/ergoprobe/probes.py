"""Local-observable witnesses of ergodicity: quantum Fisher information
dynamics with regime fitting, and the random-matrix fluctuation-dissipation
check (decay-rate extraction, microcanonical observable variance, prefactor
fitting).

The QFI of a pure state evolved under H(lambda), with the parameter entering
through a generator G = d H / d lambda, is evaluated in the eigenbasis via a
derivative-state vector whose components are

    v_mu(t) = -i t e^{-i E_mu t} sum_nu G_mu,nu e^{i theta t} sinc(theta t) a_nu,

theta = (E_mu - E_nu)/2, giving F_Q = 4 (<v|v> - |<psi(t)|v>|^2). This is
algebraically identical to the full triple-sum expression but costs
O(dim^2) per time point; `qfi_trace_reference` keeps the literal triple sum
as a small-dimension oracle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.optimize

from .errors import BasisMismatchError, CrossoverUndefinedError, FitError
from .evolve import ObservableTrace, TimeGrid, eigenbasis_amplitudes, operator_in_eigenbasis
from .hilbert import StateVector
from .models import HamiltonianMatrix, hermiticity_deviation
from .spectra import DOSEstimate, EigenSystem, diagonalize


@dataclass
class GeneratorObservable:
    """Hermitian generator dH/dlambda with its eigenbasis matrix cached."""

    operator: np.ndarray
    eigenbasis_elements: np.ndarray

    @staticmethod
    def from_eigensystem(es: EigenSystem, operator) -> "GeneratorObservable":
        m = operator.entries if isinstance(operator, HamiltonianMatrix) else np.asarray(operator)
        if hermiticity_deviation(m) > 1e-12:
            raise ValueError("generator must be Hermitian")
        return GeneratorObservable(operator=m, eigenbasis_elements=operator_in_eigenbasis(es, m))


@dataclass
class QFITrace:
    grid: TimeGrid
    values: np.ndarray


@dataclass
class FitReport:
    model: str  # "linear_plus_quadratic" | "quadratic_only"
    coefficients: tuple
    r2_adjusted: float
    window: tuple


@dataclass
class FDTRecord:
    """One point of the fluctuation-dissipation scatter."""

    scenario: str
    n_sites: int
    scan_value: float
    seed: int
    delta2: float
    gamma: float
    dos: float
    delta_o2: float
    chi: float = 1.0

    @property
    def predicted_delta2(self) -> float:
        return fdt_predict(self.delta_o2, self.dos, self.gamma, self.chi)


def _sinc(x: np.ndarray) -> np.ndarray:
    # np.sinc is sin(pi x)/(pi x); we need sin(x)/x with sinc(0) = 1.
    return np.sinc(x / np.pi)


def qfi_trace(es: EigenSystem, psi0: StateVector, gen: GeneratorObservable,
              grid: TimeGrid) -> QFITrace:
    """Quantum Fisher information along the evolution (derivative-state form)."""
    a = eigenbasis_amplitudes(es, psi0)
    e = es.energies
    theta = 0.5 * (e[:, None] - e[None, :])
    o = gen.eigenbasis_elements
    out = np.empty(len(grid))
    for k, t in enumerate(grid.points):
        ph = theta * t
        w = o * (_sinc(ph) * (np.cos(ph) + 1j * np.sin(ph)))
        u = w @ a
        norm2 = float(np.vdot(u, u).real)
        overlap = np.vdot(a, u)
        out[k] = 4.0 * t * t * (norm2 - (overlap.real ** 2 + overlap.imag ** 2))
    return QFITrace(grid, out)


def qfi_trace_reference(es: EigenSystem, psi0: StateVector, gen: GeneratorObservable,
                        grid: TimeGrid) -> QFITrace:
    """Literal triple-sum evaluation; cubic per point, oracle for small dims."""
    a = eigenbasis_amplitudes(es, psi0)
    e = es.energies
    theta = 0.5 * (e[:, None] - e[None, :])
    o = gen.eigenbasis_elements
    out = np.empty(len(grid))
    for k, t in enumerate(grid.points):
        s = _sinc(theta * t)
        phase = np.exp(1j * theta * t)
        os = o * s
        triple = np.einsum("m,n,mr,rn,mn->", a.conj(), a, os, os, phase, optimize=True)
        double = np.einsum("m,n,mn,mn->", a.conj(), a, phase, os, optimize=True)
        out[k] = 4.0 * t * t * (triple.real - abs(double) ** 2)
    return QFITrace(grid, out)


def loschmidt_qfi_check(h_builder: Callable[[float], HamiltonianMatrix], lam: float,
                        psi0: StateVector, grid: TimeGrid,
                        epsilon: float = 1e-5) -> float:
    """Max relative deviation between the QFI and its Loschmidt-echo limit.

    The echo fidelity F_eps(t) = |<psi0| U_lam^dag(t) U_{lam+eps}(t) |psi0>|^2
    of a pure state expands as 1 - eps^2 F_Q / 4 + O(eps^3), so the
    finite-difference estimate is 4 (1 - F_eps)/eps^2; this evaluates it and
    compares pointwise against `qfi_trace`.
    """
    h0 = h_builder(lam)
    h1 = h_builder(lam + epsilon)
    es0 = diagonalize(h0)
    es1 = diagonalize(h1)
    gen_matrix = (h1.entries - h0.entries) / epsilon
    gen = GeneratorObservable.from_eigensystem(es0, gen_matrix)
    reference = qfi_trace(es0, psi0, gen, grid).values

    a0 = eigenbasis_amplitudes(es0, psi0)
    a1 = eigenbasis_amplitudes(es1, psi0)
    cross = es0.vectors.T @ es1.vectors if np.isrealobj(es0.vectors) \
        else es0.vectors.conj().T @ es1.vectors
    times = grid.points
    echo = np.empty(len(times))
    for k, t in enumerate(times):
        bra = a0 * np.exp(-1j * es0.energies * t)
        ket = a1 * np.exp(-1j * es1.energies * t)
        amp = np.vdot(bra, cross @ ket)
        echo[k] = abs(amp) ** 2
    fd = 4.0 * (1.0 - echo) / epsilon ** 2
    scale = np.maximum(np.abs(reference), 1e-8)
    return float(np.max(np.abs(fd - reference) / scale))


def _r2_adjusted(y: np.ndarray, fitted: np.ndarray, n_params: int) -> float:
    n = len(y)
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else -np.inf
    r2 = 1.0 - ss_res / ss_tot
    return 1.0 - (1.0 - r2) * (n - 1) / (n - n_params - 1)


def fit_qfi_regimes(trace: QFITrace, window: Optional[tuple] = None):
    """Least-squares fits of the trace to alpha*t + beta*t^2 and gamma*t^2.

    Fits pass through the origin; alpha is constrained nonnegative. Without
    an explicit window the fit drops the first 1% of points, estimates the
    crossover tau = alpha/beta once, and refits on [t_min, 5*tau].
    Returns (two-parameter report, one-parameter report).
    """
    t_all = trace.grid.points
    y_all = trace.values
    if window is None:
        lo = t_all[max(1, len(t_all) // 100)]
        window = (lo, t_all[-1])
        first = _fit_on_window(t_all, y_all, window)
        alpha, beta = first[0].coefficients
        if alpha > 0 and beta > 0:
            window = (lo, min(5.0 * alpha / beta, t_all[-1]))
    return _fit_on_window(t_all, y_all, window)


def _fit_on_window(t_all, y_all, window):
    sel = (t_all >= window[0]) & (t_all <= window[1])
    t, y = t_all[sel], y_all[sel]
    if len(t) < 10:
        raise FitError("fewer than 10 points in the fit window")
    design = np.column_stack([t, t * t])
    res = scipy.optimize.lsq_linear(design, y, bounds=([0.0, -np.inf], [np.inf, np.inf]))
    alpha, beta = res.x
    two = FitReport("linear_plus_quadratic", (float(alpha), float(beta)),
                    _r2_adjusted(y, design @ res.x, 2), window)
    t2 = t * t
    gamma = float(t2 @ y / (t2 @ t2))
    one = FitReport("quadratic_only", (gamma,),
                    _r2_adjusted(y, gamma * t2, 1), window)
    return two, one


def heisenberg_crossover(trace_or_fit, dos: DOSEstimate):
    """Crossover time tau = alpha/beta where the quadratic term overtakes the
    linear one, and its ratio to the density of states."""
    if isinstance(trace_or_fit, FitReport):
        two_param = trace_or_fit
    else:
        two_param, _ = fit_qfi_regimes(trace_or_fit)
    alpha, beta = two_param.coefficients
    if alpha <= 0 or beta <= 0:
        raise CrossoverUndefinedError(
            f"crossover undefined for alpha={alpha:.3g}, beta={beta:.3g}")
    tau = alpha / beta
    return tau, tau / dos.value


def decay_rate(trace: ObservableTrace, o_equilibrium: Optional[float] = None) -> float:
    """Decay rate Gamma from an exponential fit O_inf + (O_0 - O_inf) e^{-Gamma t}.

    The fit window ends at 3x the first time the trace comes within 5% (of
    the decay amplitude) of its long-time mean; `o_equilibrium` seeds O_inf
    (defaults to the mean over the trailing half).
    """
    t = trace.grid.points
    y = trace.values
    o_inf0 = float(np.mean(y[len(y) // 2:])) if o_equilibrium is None else float(o_equilibrium)
    o_00 = float(y[0])
    amplitude = abs(o_00 - o_inf0)
    if amplitude < 1e-9 or np.ptp(y) < 1e-9:
        raise FitError("trace shows no decay to fit")
    inside = np.abs(y - o_inf0) <= 0.05 * amplitude
    if inside.any():
        t_cross = float(t[int(np.argmax(inside))])
    else:
        t_cross = float(t[-1]) / 3.0  # no crossing resolved; use the whole grid
    t_cross = max(t_cross, float(t[-1]) / len(t))
    sel = t <= 3.0 * t_cross
    if sel.sum() < 8:
        sel = np.ones_like(t, dtype=bool)

    def model(tt, o_inf, o_0, gamma):
        return o_inf + (o_0 - o_inf) * np.exp(-gamma * tt)

    guess_gamma = 1.0 / t_cross
    try:
        popt, _ = scipy.optimize.curve_fit(
            model, t[sel], y[sel], p0=[o_inf0, o_00, guess_gamma], maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"decay fit did not converge: {exc}") from exc
    gamma = float(popt[2])
    if gamma <= 0:
        raise FitError(f"fitted decay rate nonpositive ({gamma:.3g})")
    return gamma


def microcanonical_variance(es0: EigenSystem, psi0: StateVector, o,
                            mode: str = "population",
                            window_fraction: float = 0.05,
                            min_window_states: int = 20) -> float:
    """Variance of the observable over the uncoupled eigenbasis.

    population mode: moments sum_alpha w_alpha (O_aa)^k with weights
    w_alpha = |<phi_alpha|psi0>|^2 (initial-state populations).

    window mode: operator moments <phi_alpha|O^k|phi_alpha> averaged
    uniformly over uncoupled states within an energy shell around the state
    energy (shell half-width = window_fraction * spectral width, widened
    until it holds `min_window_states` states). Use this when psi0 is itself
    an uncoupled eigenstate, where the population mode degenerates to zero.
    """
    m = o.entries if isinstance(o, HamiltonianMatrix) else np.asarray(o)
    a = eigenbasis_amplitudes(es0, psi0)
    w = a.real ** 2 + a.imag ** 2
    v = es0.vectors
    d = np.diagonal(m)
    is_diag = np.count_nonzero(m) == np.count_nonzero(d)
    if is_diag:
        o_aa = (v.real ** 2 + v.imag ** 2).T @ d.real
    else:
        o_aa = np.einsum("ia,ia->a", v.conj(), m @ v).real
    if mode == "population":
        m1 = float(w @ o_aa)
        m2 = float(w @ (o_aa ** 2))
        return m2 - m1 * m1
    if mode != "window":
        raise ValueError("mode must be 'population' or 'window'")
    e = es0.energies
    e0 = float(w @ e)
    width = float(e[-1] - e[0])
    half = window_fraction * width
    sel = np.abs(e - e0) <= half
    while sel.sum() < min_window_states and half < width:
        half *= 2.0
        sel = np.abs(e - e0) <= half
    if is_diag:
        o2_aa = (v.real ** 2 + v.imag ** 2).T @ (d.real ** 2)
    else:
        m2op = m @ m
        o2_aa = np.einsum("ia,ia->a", v.conj(), m2op @ v).real
    m1 = float(o_aa[sel].mean())
    m2 = float(o2_aa[sel].mean())
    return m2 - m1 * m1


def fdt_predict(delta_o2: float, dos, gamma: float, chi: float = 1.0) -> float:
    """Predicted long-time fluctuation chi * dO^2 / (4 pi D(E) Gamma)."""
    d = dos.value if isinstance(dos, DOSEstimate) else float(dos)
    if delta_o2 <= 0 or d <= 0 or gamma <= 0 or chi <= 0:
        raise ValueError("fluctuation-dissipation inputs must be positive")
    return chi * delta_o2 / (4.0 * np.pi * d * gamma)


def fit_chi(records: Sequence[FDTRecord]):
    """Least-squares slope of measured delta^2 against dO^2/(4 pi D Gamma).

    Returns (chi, diagnostics dict with rms residual and point count).
    """
    recs = list(records)
    if len(recs) < 3:
        raise ValueError("need at least 3 records to fit chi")
    x = np.array([fdt_predict(r.delta_o2, r.dos, r.gamma, 1.0) for r in recs])
    y = np.array([r.delta2 for r in recs])
    denom = float(x @ x)
    if denom == 0.0:
        raise ValueError("degenerate fluctuation-dissipation data")
    chi = float(x @ y / denom)
    resid = y - chi * x
    diagnostics = {
        "rms_residual": float(np.sqrt(np.mean(resid ** 2))),
        "n_points": len(recs),
    }
    return chi, diagnostics


FDT_CSV_COLUMNS = ["scenario", "N", "W_or_J", "seed", "delta2", "gamma", "dos",
                   "delta_O2", "predicted_delta2", "chi_used"]


def write_fdt_csv(records: Sequence[FDTRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(FDT_CSV_COLUMNS)
        for r in records:
            wr.writerow([r.scenario, r.n_sites, repr(float(r.scan_value)), r.seed,
                         repr(float(r.delta2)), repr(float(r.gamma)), repr(float(r.dos)),
                         repr(float(r.delta_o2)), repr(float(r.predicted_delta2)),
                         repr(float(r.chi))])
