"""Scenario execution: build models, run diagnostics over scans and
disorder ensembles, emit CSVs and a JSON manifest.

Determinism contract: every task is a pure function of (config, scan value,
realization seed); results are collected into sorted order before writing,
so outputs are byte-identical for any worker count. The uncoupled spin
Hamiltonian factorizes over the probe bit and the bath chain, which is
exploited to avoid ever diagonalizing it densely.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import InitialStateKind, InitialStateSpec, ScenarioConfig, ScenarioKind
from .errors import CrossoverUndefinedError, DimensionCapError
from .evolve import (
    TimeGrid,
    diagonal_ensemble_mean,
    entropy_trace,
    expectation_trace,
    expval,
    fluctuation_closed_form,
    survival_probability,
)
from .hilbert import SpinBasis, StateVector, basis_state, build_constrained_basis, build_full_basis
from .models import (
    HamiltonianMatrix,
    PXPParams,
    SpinChainParams,
    _z_values,
    build_bath,
    build_bath_alone,
    build_coupling,
    build_qmbs,
    draw_disorder,
    site_operator,
)
from .probes import (
    FDTRecord,
    GeneratorObservable,
    decay_rate,
    fit_chi,
    fit_qfi_regimes,
    heisenberg_crossover,
    qfi_trace,
    write_fdt_csv,
)
from .spectra import (
    DOSEstimate,
    EigenSystem,
    diagonalize,
    dos_at_energy,
    eigenvalues_only,
    level_spacing_distribution,
    r_statistic,
)


# ---------------------------------------------------------------------------
# uncoupled spin system (product structure, never densely diagonalized)

@dataclass
class UncoupledSpinSystem:
    """Eigen data of the uncoupled Hamiltonian: probe z field (+ its disorder
    component) times a standalone bath chain (+ bath disorder)."""

    bath_es: EigenSystem
    probe_field: float
    energies: np.ndarray      # all 2*dim_bath levels, ascending
    probe_sign: np.ndarray    # sigma_z1 value of each level
    bath_index: np.ndarray    # bath eigenstate index of each level

    @staticmethod
    def build(params: SpinChainParams, fields: Optional[np.ndarray]) -> "UncoupledSpinSystem":
        bath_fields = fields[1:] if fields is not None else None
        bath_es = diagonalize(build_bath_alone(params, bath_fields))
        pf = params.b_probe + (fields[0] if fields is not None else 0.0)
        eb = bath_es.energies
        m = len(eb)
        energies = np.concatenate([eb - pf, eb + pf])
        signs = np.concatenate([-np.ones(m), np.ones(m)])
        bidx = np.concatenate([np.arange(m), np.arange(m)])
        order = np.argsort(energies, kind="stable")
        return UncoupledSpinSystem(bath_es, pf, energies[order], signs[order], bidx[order])

    def eigenstate(self, ordinal: int, basis: SpinBasis) -> StateVector:
        vb = self.bath_es.vectors[:, self.bath_index[ordinal]]
        amp = np.zeros(basis.dim, dtype=np.complex128)
        if self.probe_sign[ordinal] > 0:
            amp[1::2] = vb
        else:
            amp[0::2] = vb
        return StateVector(basis, amp)

    def probe_bath_product(self, basis: SpinBasis, probe_axis: str,
                           bath_energy: Optional[float]) -> StateVector:
        """|up_x> or |up_z> on the probe (x) bath eigenstate nearest a target."""
        eb = self.bath_es.energies
        target = 0.5 * (eb[0] + eb[-1]) if bath_energy is None else bath_energy
        k = int(np.argmin(np.abs(eb - target)))
        vb = self.bath_es.vectors[:, k]
        amp = np.zeros(basis.dim, dtype=np.complex128)
        if probe_axis == "z":
            amp[1::2] = vb
        else:  # +x: equal superposition of probe up/down
            amp[0::2] = vb / np.sqrt(2.0)
            amp[1::2] = vb / np.sqrt(2.0)
        return StateVector(basis, amp)

    def sigma_z1_window_variance(self, e0: float, window_fraction: float,
                                 min_states: int = 20) -> float:
        """Microcanonical variance of sigma_z1 over an energy shell: the
        operator is diagonal (+-1) in this product eigenbasis, so
        <O^2> = 1 and the variance is 1 - mean(sign)^2."""
        e = self.energies
        width = float(e[-1] - e[0])
        half = window_fraction * width
        sel = np.abs(e - e0) <= half
        while sel.sum() < min_states and half < width:
            half *= 2.0
            sel = np.abs(e - e0) <= half
        m1 = float(self.probe_sign[sel].mean())
        return 1.0 - m1 * m1


# ---------------------------------------------------------------------------
# model resolution

def resolve_spin_params(cfg: ScenarioConfig, scan_value: float, seed: int) -> SpinChainParams:
    n, jx_sb, jz_sb, w = cfg.n_sites, cfg.jx_sb, cfg.jz_sb, cfg.w_disorder
    if cfg.scan_parameter == "coupling":
        # scan the overall contact strength, preserving the preset jz:jx ratio
        ratio = (cfg.jz_sb / cfg.jx_sb) if cfg.jx_sb != 0.0 else 0.0
        jx_sb = scan_value
        jz_sb = ratio * scan_value
    elif cfg.scan_parameter == "w_disorder":
        w = scan_value
    elif cfg.scan_parameter == "n_sites":
        n = int(round(scan_value))
    elif cfg.scan_parameter != "none":
        raise ValueError(f"unknown scan parameter '{cfg.scan_parameter}'")
    contact = cfg.contact_site if cfg.contact_site is not None else min(5, n)
    return SpinChainParams(n, cfg.b_probe, cfg.bx_bath, cfg.jx_bath,
                           jz_sb, jx_sb, contact, w, seed)


def check_dimension(cfg: ScenarioConfig, dim: int) -> None:
    if dim > cfg.dimension_cap:
        raise DimensionCapError(
            f"dense dimension {dim} exceeds the cap {cfg.dimension_cap}; "
            f"reduce n_sites or raise [scenario] dimension_cap")


def spin_hamiltonians(params: SpinChainParams, basis: SpinBasis):
    """(uncoupled H0, full H, disorder fields). H0 reuses the bath storage."""
    fields = None
    bath = build_bath(params, basis)
    h0e = bath.entries
    diag = params.b_probe * _z_values(basis, 1)
    if params.w_disorder > 0.0:
        real = draw_disorder(params)
        fields = real.fields
        for i in range(1, params.n_sites + 1):
            if fields[i - 1] != 0.0:
                diag = diag + fields[i - 1] * _z_values(basis, i)
    h0e[np.diag_indices(basis.dim)] += diag
    h0 = HamiltonianMatrix(basis, h0e, "uncoupled", params)
    coup = build_coupling(params, basis)
    h = HamiltonianMatrix(basis, h0e + coup.entries, "full", params)
    return h0, h, fields


# ---------------------------------------------------------------------------
# initial states

def neel_config(n: int, primed: bool = False) -> int:
    first = 2 if primed else 1
    return sum(1 << (s - 1) for s in range(first, n + 1, 2))


def random_superposition_state(es: EigenSystem, basis: SpinBasis, count: int,
                               seed: int, pool_window: float = 0.6):
    """Random combination of the `count` pool eigenstates least overlapping
    the alternating product state.

    The pool is the central `pool_window` index range with degenerate
    clusters excluded (eigenvectors inside a degenerate subspace are
    solver-arbitrary, so their overlaps are not reproducible).
    """
    n = basis.n_sites
    z2_idx = basis.index_of(neel_config(n))
    overlap = np.abs(es.vectors[z2_idx, :])
    dim = es.dim
    lo = int(round(dim * (1.0 - pool_window) / 2.0))
    pool = np.arange(lo, dim - lo)
    e = es.energies
    width = float(e[-1] - e[0])
    gaps = np.diff(e)
    deg = gaps < 1e-10 * width
    in_cluster = np.zeros(dim, dtype=bool)
    in_cluster[:-1] |= deg
    in_cluster[1:] |= deg
    pool = pool[~in_cluster[pool]]
    if len(pool) < count:
        raise ValueError(f"pool of {len(pool)} nondegenerate states < count {count}")
    order = pool[np.argsort(overlap[pool], kind="stable")]
    chosen = np.sort(order[:count])
    rng = np.random.Generator(np.random.Philox(key=seed))
    c = rng.uniform(-1, 1, size=count) + 1j * rng.uniform(-1, 1, size=count)
    c /= np.linalg.norm(c)
    amp = es.vectors[:, chosen] @ c
    return StateVector(basis, amp), chosen


def random_product_configuration(basis: SpinBasis, probe_site: int,
                                 seed: int) -> StateVector:
    """Seeded random basis configuration with the probe site up."""
    bit = np.uint64(1 << (probe_site - 1))
    eligible = basis.states[(basis.states & bit) != 0]
    rng = np.random.Generator(np.random.Philox(key=seed))
    pick = int(eligible[rng.integers(len(eligible))])
    return basis_state(basis, pick)


def make_initial_state(spec: InitialStateSpec, basis: SpinBasis,
                       uncoupled: Optional[UncoupledSpinSystem] = None,
                       full_es: Optional[EigenSystem] = None,
                       probe_site: int = 1) -> StateVector:
    kind = spec.kind
    if kind in (InitialStateKind.PROBE_UP_X_BATH_EIGENSTATE,
                InitialStateKind.PROBE_UP_Z_BATH_EIGENSTATE):
        if uncoupled is None:
            raise ValueError("bath eigensystem required for product initial states")
        axis = "x" if kind is InitialStateKind.PROBE_UP_X_BATH_EIGENSTATE else "z"
        return uncoupled.probe_bath_product(basis, axis, spec.bath_energy)
    if kind is InitialStateKind.EIGENSTATE_INDEX:
        if spec.reference == "uncoupled":
            if uncoupled is None:
                raise ValueError("uncoupled eigensystem required")
            alpha0 = spec.resolve_alpha0(len(uncoupled.energies))
            return uncoupled.eigenstate(alpha0, basis)
        if full_es is None:
            raise ValueError("full eigensystem required")
        alpha0 = spec.resolve_alpha0(full_es.dim)
        return StateVector(basis, full_es.vectors[:, alpha0].astype(np.complex128))
    if kind is InitialStateKind.NEEL_Z2:
        return basis_state(basis, neel_config(basis.n_sites))
    if kind is InitialStateKind.NEEL_Z2_PRIME:
        return basis_state(basis, neel_config(basis.n_sites, primed=True))
    if kind is InitialStateKind.RANDOM_EIGEN_SUPERPOSITION:
        if full_es is None:
            raise ValueError("full eigensystem required")
        state, _ = random_superposition_state(full_es, basis, spec.count,
                                              spec.state_seed, spec.pool_window)
        return state
    if kind is InitialStateKind.RANDOM_PRODUCT_CONFIGURATION:
        return random_product_configuration(basis, probe_site, spec.state_seed)
    raise ValueError(f"unsupported initial state kind {kind}")


# ---------------------------------------------------------------------------
# output helpers

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(x) for x in row])


def aggregate(records, group_keys, value_key):
    """Mean and standard error of `value_key` per group, sorted by group."""
    if not records:
        raise ValueError("no records to aggregate")
    groups = {}
    for r in records:
        groups.setdefault(tuple(r[k] for k in group_keys), []).append(r[value_key])
    rows = []
    for key in sorted(groups):
        vals = np.asarray(groups[key], dtype=float)
        if len(vals) > 1 and not np.all(vals == vals[0]):
            stderr = float(vals.std(ddof=1) / np.sqrt(len(vals)))
        else:
            stderr = 0.0
        rows.append(dict(zip(group_keys, key),
                         mean=float(vals.mean()), stderr=stderr, n=len(vals)))
    return rows


def write_aggregate_csv(path, rows, group_keys, header_names=None,
                        mean_name="mean") -> None:
    names = header_names if header_names is not None else list(group_keys)
    header = list(names) + [mean_name, "stderr", "n_realizations"]
    out = [[r[k] for k in group_keys] + [r["mean"], r["stderr"], r["n"]] for r in rows]
    write_csv(path, header, out)


def _state_energy(es: EigenSystem, psi: StateVector) -> float:
    """<psi|H|psi> evaluated in the eigenbasis."""
    v = es.vectors
    a = (v.T @ psi.amplitudes) if np.isrealobj(v) else (v.conj().T @ psi.amplitudes)
    w = a.real ** 2 + a.imag ** 2
    return float(w @ es.energies)


def _fit_decay_rate(es, psi, o, o_inf, t_heis, n_points):
    """Two-stage decay-rate extraction.

    A coarse logarithmic trace brackets the time where the observable first
    comes within 5% (of its initial deviation) of the equilibrium value; the
    exponential fit then runs on a linear grid dense enough to resolve it.
    Returns (gamma, fit grid, fit trace).
    """
    t_hi = max(t_heis, 1.0)
    probe_grid = TimeGrid.logarithmic(0.01, t_hi, 160)
    coarse = expectation_trace(es, psi, o, probe_grid).values
    amp0 = coarse[0] - o_inf
    inside = np.abs(coarse - o_inf) <= 0.05 * abs(amp0) if amp0 != 0 else np.ones(1, bool)
    if amp0 != 0 and inside.any():
        t5 = float(probe_grid.points[int(np.argmax(inside))])
    else:
        t5 = t_hi / 3.0  # decay slower than the probed horizon
    t_max = min(12.0 * t5, 20.0 * t_hi)
    grid = TimeGrid.linear(t_max, n_points)
    trace = expectation_trace(es, psi, o, grid)
    return decay_rate(trace, o_equilibrium=o_inf), grid, trace


# ---------------------------------------------------------------------------
# task orchestration

@dataclass
class TaskLog:
    analysis: str
    scan_value: float
    realization: int
    seed: int
    wall_s: float
    status: str
    error: str = ""


@dataclass
class RunReport:
    out_dir: Path
    tasks: list
    outputs: list
    failures: int

    @property
    def ok(self) -> bool:
        return self.failures == 0


def _run_pool(cfg: ScenarioConfig, jobs, fn):
    """jobs: list of (scan_value, realization); fn(scan_value, seed) -> result.
    Returns ({(scan_value, realization): result}, [TaskLog])."""
    results, logs = {}, []

    def one(job):
        v, r = job
        seed = cfg.base_seed + r
        t0 = time.perf_counter()
        try:
            res = fn(v, seed)
            return (job, seed, time.perf_counter() - t0, res, "")
        except Exception as exc:  # recorded per-realization, run continues
            return (job, seed, time.perf_counter() - t0, None, f"{type(exc).__name__}: {exc}")

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            outcomes = list(ex.map(one, jobs))
    else:
        outcomes = [one(j) for j in jobs]
    for (job, seed, wall, res, err) in outcomes:
        v, r = job
        status = "ok" if err == "" else "failed"
        logs.append(TaskLog(cfg.analysis, float(v), r, seed, wall, status, err))
        if err == "":
            results[job] = res
    return results, logs


def _jobs(cfg: ScenarioConfig):
    return [(v, r) for v in cfg.scan_values for r in range(cfg.n_realizations)]


def _scan_label(cfg: ScenarioConfig) -> str:
    return {"coupling": "J", "w_disorder": "W", "n_sites": "N"}.get(cfg.scan_parameter, "scan")


# ---------------------------------------------------------------------------
# analyses: spin scenarios

def _needs_uncoupled(spec: InitialStateSpec) -> bool:
    return spec.kind in (InitialStateKind.PROBE_UP_X_BATH_EIGENSTATE,
                         InitialStateKind.PROBE_UP_Z_BATH_EIGENSTATE) or (
        spec.kind is InitialStateKind.EIGENSTATE_INDEX and spec.reference == "uncoupled")


def _run_levels(cfg: ScenarioConfig, out: Path):
    def task(v, seed):
        params = resolve_spin_params(cfg, v, seed)
        basis = build_full_basis(params.n_sites)
        check_dimension(cfg, basis.dim)
        _, h, _ = spin_hamiltonians(params, basis)
        energies = eigenvalues_only(h)
        stats = r_statistic(energies)
        dist = level_spacing_distribution(energies)
        return {"mean_r": stats.mean_r, "ks_poisson": dist.ks_poisson,
                "ks_wigner_dyson": dist.ks_wigner_dyson,
                "bin_centers": dist.bin_centers, "density": dist.density}

    results, logs = _run_pool(cfg, _jobs(cfg), task)
    records = [{"scan": v, "mean_r": res["mean_r"], "ks_poisson": res["ks_poisson"],
                "ks_wigner_dyson": res["ks_wigner_dyson"]}
               for (v, r), res in sorted(results.items())]
    outputs = []
    if records:
        rows = aggregate(records, ["scan"], "mean_r")
        path = out / "r_statistic.csv"
        write_aggregate_csv(path, rows, ["scan"], ["W_or_J"], mean_name="mean_r")
        outputs.append(path)
        ks_rows = []
        for v in cfg.scan_values:
            sub = [r for r in records if r["scan"] == v]
            if not sub:
                continue
            ks_rows.append([v, float(np.mean([r["ks_poisson"] for r in sub])),
                            float(np.mean([r["ks_wigner_dyson"] for r in sub]))])
        path = out / "ks_distances.csv"
        write_csv(path, ["W_or_J", "ks_poisson", "ks_wigner_dyson"], ks_rows)
        outputs.append(path)
        for v in cfg.scan_values:
            dens = [res["density"] for (vv, r), res in sorted(results.items()) if vv == v]
            if not dens:
                continue
            centers = next(res["bin_centers"] for (vv, r), res in results.items() if vv == v)
            mean_d = np.mean(dens, axis=0)
            path = out / f"spacing_hist_{_scan_label(cfg)}{v:g}.csv"
            write_csv(path, ["s_bin_center", "density"], zip(centers, mean_d))
            outputs.append(path)
    return logs, outputs


def _run_dos(cfg: ScenarioConfig, out: Path):
    def task(v, seed):
        params = resolve_spin_params(cfg, v, seed)
        basis = build_full_basis(params.n_sites)
        check_dimension(cfg, basis.dim)
        real_fields_needed = _needs_uncoupled(cfg.initial_state)
        h0, h, fields = spin_hamiltonians(params, basis)
        uncoupled = UncoupledSpinSystem.build(params, fields) if real_fields_needed else None
        psi0 = make_initial_state(cfg.initial_state, basis, uncoupled=uncoupled)
        e0 = expval(psi0, h)
        energies = eigenvalues_only(h)
        return dos_at_energy(energies, e0).value

    results, logs = _run_pool(cfg, _jobs(cfg), task)
    records = [{"scan": v, "dos": res} for (v, r), res in sorted(results.items())]
    outputs = []
    if records:
        rows = aggregate(records, ["scan"], "dos")
        path = out / "dos.csv"
        write_aggregate_csv(path, rows, ["scan"], ["W_or_J"], mean_name="dos")
        outputs.append(path)
    return logs, outputs


def _resolve_grid(cfg: ScenarioConfig, es=None, e0=None) -> TimeGrid:
    spec = cfg.time
    t_max = spec.t_max
    if t_max is None:
        if es is None:
            t_max = 1000.0
        else:
            t_max = 20.0 * dos_at_energy(es, e0).value
    if spec.spacing == "log":
        t_min = spec.t_min if spec.t_min > 0 else 0.05
        return TimeGrid.logarithmic(t_min, t_max, spec.n_points)
    return TimeGrid.linear(t_max, spec.n_points, t_min=spec.t_min)


def _run_entropy(cfg: ScenarioConfig, out: Path):
    grid = _resolve_grid(cfg)
    kept = cfg.kept_sites()

    def task(v, seed):
        params = resolve_spin_params(cfg, v, seed)
        basis = build_full_basis(params.n_sites)
        check_dimension(cfg, basis.dim)
        h0, h, fields = spin_hamiltonians(params, basis)
        uncoupled = UncoupledSpinSystem.build(params, fields) \
            if _needs_uncoupled(cfg.initial_state) else None
        es = diagonalize(h)
        psi0 = make_initial_state(cfg.initial_state, basis,
                                  uncoupled=uncoupled, full_es=es)
        return entropy_trace(es, psi0, grid, kept).values

    results, logs = _run_pool(cfg, _jobs(cfg), task)
    outputs = []
    fit_rows = []
    label = _scan_label(cfg)
    for v in cfg.scan_values:
        traces = [res for (vv, r), res in sorted(results.items()) if vv == v]
        if not traces:
            continue
        mean_trace = np.mean(traces, axis=0)
        path = out / f"entropy_trace_{label}{v:g}.csv"
        write_csv(path, ["t", "value"], zip(grid.points, mean_trace))
        outputs.append(path)
        t_lo = cfg.fit_t_min if cfg.fit_t_min is not None else 1.0
        sel = grid.points >= t_lo
        if sel.sum() >= 4:
            a, b = np.polyfit(np.log(grid.points[sel]), mean_trace[sel], 1)
            fit_rows.append([v, a, b])
    if fit_rows:
        path = out / "entropy_fit.csv"
        write_csv(path, [label, "a_log_coeff", "b_offset"], fit_rows)
        outputs.append(path)
    return logs, outputs


def _run_qfi(cfg: ScenarioConfig, out: Path):
    outputs = []
    all_logs = []
    fit_rows = []
    label = _scan_label(cfg)

    def build_system(v, seed):
        params = resolve_spin_params(cfg, v, seed)
        basis = build_full_basis(params.n_sites)
        check_dimension(cfg, basis.dim)
        h0, h, fields = spin_hamiltonians(params, basis)
        uncoupled = UncoupledSpinSystem.build(params, fields) \
            if _needs_uncoupled(cfg.initial_state) else None
        es = diagonalize(h)
        psi0 = make_initial_state(cfg.initial_state, basis,
                                  uncoupled=uncoupled, full_es=es)
        return basis, es, psi0

    for v in cfg.scan_values:
        # realization 0 runs first and pins the shared grid for this scan value
        t0 = time.perf_counter()
        basis, es, psi0 = build_system(v, cfg.base_seed)
        e0 = _state_energy(es, psi0)
        grid = _resolve_grid(cfg, es=es, e0=e0)
        dos0 = dos_at_energy(es, e0).value
        gen = GeneratorObservable.from_eigensystem(es, site_operator(basis, 1, "z").entries)
        first_trace = qfi_trace(es, psi0, gen, grid).values
        wall0 = time.perf_counter() - t0
        del es, gen

        def task(vv, seed):
            b, e, p = build_system(vv, seed)
            g = GeneratorObservable.from_eigensystem(e, site_operator(b, 1, "z").entries)
            return qfi_trace(e, p, g, grid).values

        rest = [(v, r) for r in range(1, cfg.n_realizations)]
        results, logs = _run_pool(cfg, rest, task)
        all_logs.append(TaskLog(cfg.analysis, float(v), 0, cfg.base_seed, wall0, "ok"))
        all_logs.extend(logs)
        traces = [first_trace] + [res for key, res in sorted(results.items())]
        mean_trace = np.mean(traces, axis=0)
        path = out / f"qfi_trace_{label}{v:g}.csv"
        write_csv(path, ["t", "value"], zip(grid.points, mean_trace))
        outputs.append(path)
        from .probes import QFITrace
        two, one = fit_qfi_regimes(QFITrace(grid, mean_trace))
        try:
            tau, ratio = heisenberg_crossover(two, DOSEstimate(e0, dos0, 0.0))
        except CrossoverUndefinedError:
            tau, ratio = float("nan"), float("nan")
        fit_rows.append([v, two.coefficients[0], two.coefficients[1], two.r2_adjusted,
                         one.coefficients[0], one.r2_adjusted, tau, ratio])
    path = out / "qfi_fits.csv"
    write_csv(path, [label, "alpha", "beta", "r2adj_linear_plus_quadratic",
                     "gamma", "r2adj_quadratic_only", "tau_crossover", "tau_over_dos"],
              fit_rows)
    outputs.append(path)
    return all_logs, outputs


def _run_flucts(cfg: ScenarioConfig, out: Path):
    scenario_tag = cfg.scenario.value

    def task(v, seed):
        params = resolve_spin_params(cfg, v, seed)
        basis = build_full_basis(params.n_sites)
        check_dimension(cfg, basis.dim)
        h0, h, fields = spin_hamiltonians(params, basis)
        uncoupled = UncoupledSpinSystem.build(params, fields)
        psi0 = make_initial_state(cfg.initial_state, basis, uncoupled=uncoupled)
        es = diagonalize(h)
        del h, h0
        e0 = _state_energy(es, psi0)
        dos = dos_at_energy(es, e0)
        o = site_operator(basis, 1, "z")
        delta2 = fluctuation_closed_form(es, psi0, o)
        t_heis = dos.value
        o_inf = diagonal_ensemble_mean(es, psi0, o)
        gamma, _, _ = _fit_decay_rate(es, psi0, o, o_inf, t_heis, cfg.time.n_points)
        e0_uncoupled = _uncoupled_energy(uncoupled, psi0)
        delta_o2 = uncoupled.sigma_z1_window_variance(e0_uncoupled, cfg.microcanonical_window)
        # finite-horizon temporal variance on the long (Heisenberg-scale) grid
        t_span = cfg.time.t_max if cfg.time.t_max is not None else 20.0 * t_heis
        long_grid = TimeGrid.linear(t_span, cfg.time.n_points)
        vals = expectation_trace(es, psi0, o, long_grid).values
        mean_val = np.trapezoid(vals, long_grid.points) / t_span
        finite_t = float(np.trapezoid((vals - mean_val) ** 2, long_grid.points) / t_span)
        rec = FDTRecord(scenario_tag, params.n_sites, float(v), seed, delta2, gamma,
                        dos.value, delta_o2, chi=cfg.chi)
        return rec, finite_t, t_span

    results, logs = _run_pool(cfg, _jobs(cfg), task)
    outputs = []
    ordered = sorted(results.items())
    records = [res[0] for key, res in ordered]
    if records:
        path = out / "fdt_records.csv"
        write_fdt_csv(records, path)
        outputs.append(path)
        rows = [["temporal_variance", res[2], res[1], res[0].delta2]
                for key, res in ordered]
        path = out / "fluctuations.csv"
        write_csv(path, ["mode", "T", "value", "closed_form"], rows)
        outputs.append(path)
    return logs, outputs


def _uncoupled_energy(uncoupled: UncoupledSpinSystem, psi0: StateVector) -> float:
    """<psi0|H0|psi0> via the product eigenbasis (cheap for product states)."""
    # populations over bath eigenstates for each probe sector
    amp = psi0.amplitudes
    vb = uncoupled.bath_es.vectors
    down = vb.T @ amp[0::2]
    up = vb.T @ amp[1::2]
    wd = down.real ** 2 + down.imag ** 2
    wu = up.real ** 2 + up.imag ** 2
    eb = uncoupled.bath_es.energies
    return float(wd @ (eb - uncoupled.probe_field) + wu @ (eb + uncoupled.probe_field))


# ---------------------------------------------------------------------------
# scar scenario

def _run_pxp(cfg: ScenarioConfig, out: Path):
    outputs = []
    logs = []
    analyses = cfg.pxp_analyses
    for analysis in analyses:
        if analysis == "fdt":
            lg, op = _pxp_fdt(cfg, out)
        else:
            lg, op = _pxp_single(cfg, out, analysis)
        logs.extend(lg)
        outputs.extend(op)
    return logs, outputs


def _pxp_system(cfg: ScenarioConfig, n: int):
    basis = build_constrained_basis(n)
    check_dimension(cfg, basis.dim)
    h = build_qmbs(PXPParams(n, b_probe=cfg.b_probe), basis)
    es = diagonalize(h)
    return basis, es


def _pxp_single(cfg: ScenarioConfig, out: Path, analysis: str):
    n = cfg.n_sites
    t0 = time.perf_counter()
    outputs = []
    try:
        basis, es = _pxp_system(cfg, n)
        z2 = basis_state(basis, neel_config(n))
        if analysis == "overlaps":
            idx = basis.index_of(neel_config(n))
            ov2 = es.vectors[idx, :] ** 2 if np.isrealobj(es.vectors) \
                else np.abs(es.vectors[idx, :]) ** 2
            scar_rank = np.argsort(ov2, kind="stable")[::-1][:n + 1]
            is_scar = np.zeros(es.dim, dtype=int)
            is_scar[scar_rank] = 1
            path = out / "scar_overlaps.csv"
            write_csv(path, ["energy", "overlap_sq", "is_scar"],
                      zip(es.energies, ov2, is_scar))
            outputs.append(path)
        elif analysis == "survival":
            grid = _resolve_grid(cfg) if cfg.time.t_max else TimeGrid.linear(50.0, 2001)
            rand, _ = random_superposition_state(
                es, basis, cfg.initial_state.count, cfg.initial_state.state_seed,
                cfg.initial_state.pool_window)
            for tag, psi in (("z2", z2), ("random", rand)):
                trace = survival_probability(es, psi, grid)
                path = out / f"survival_{tag}.csv"
                write_csv(path, ["t", "value"], zip(grid.points, trace.values))
                outputs.append(path)
        elif analysis == "qfi":
            e0 = _state_energy(es, z2)
            grid = _resolve_grid(cfg, es=es, e0=e0)
            gen = GeneratorObservable.from_eigensystem(
                es, site_operator(basis, 1, "z").entries)
            rand, _ = random_superposition_state(
                es, basis, cfg.initial_state.count, cfg.initial_state.state_seed,
                cfg.initial_state.pool_window)
            from .probes import QFITrace
            fit_rows = []
            for tag, psi in (("z2", z2), ("random", rand)):
                trace = qfi_trace(es, psi, gen, grid)
                path = out / f"qfi_trace_{tag}.csv"
                write_csv(path, ["t", "value"], zip(grid.points, trace.values))
                outputs.append(path)
                two, one = fit_qfi_regimes(trace)
                fit_rows.append([tag, two.coefficients[0], two.coefficients[1],
                                 two.r2_adjusted, one.coefficients[0], one.r2_adjusted])
            path = out / "qfi_fits.csv"
            write_csv(path, ["state", "alpha", "beta", "r2adj_linear_plus_quadratic",
                             "gamma", "r2adj_quadratic_only"], fit_rows)
            outputs.append(path)
        else:
            raise ValueError(f"unknown scar analysis '{analysis}'")
        logs = [TaskLog(analysis, float(n), 0, cfg.base_seed,
                        time.perf_counter() - t0, "ok")]
    except Exception as exc:
        logs = [TaskLog(analysis, float(n), 0, cfg.base_seed,
                        time.perf_counter() - t0, "failed", f"{type(exc).__name__}: {exc}")]
    return logs, outputs


def _pxp_fdt(cfg: ScenarioConfig, out: Path):
    """Fluctuation-dissipation records for the constrained model: ergodic
    (random-superposition) initial states per system size, plus a scarred
    reference point, with the prefactor fitted over the ergodic records."""
    records = []
    scar_records = []
    logs = []
    outputs = []
    sizes = [int(round(v)) for v in cfg.scan_values]
    for n in sizes:
        t0 = time.perf_counter()
        try:
            basis, es = _pxp_system(cfg, n)
            site = cfg.resolved_probe_site(n)
            o = site_operator(basis, site, "z")
            o_diag_comp = np.diagonal(o.entries)
            v = es.vectors
            o_aa = (v * v).T @ o_diag_comp if np.isrealobj(v) \
                else (np.abs(v) ** 2).T @ o_diag_comp
        except Exception as exc:
            logs.append(TaskLog("fdt", float(n), -1, cfg.base_seed, time.perf_counter() - t0,
                                "failed", f"{type(exc).__name__}: {exc}"))
            continue
        logs.append(TaskLog("fdt", float(n), -1, cfg.base_seed,
                            time.perf_counter() - t0, "ok"))

        def one_record(psi, seed, tag):
            e0 = _state_energy(es, psi)
            dos = dos_at_energy(es, e0)
            delta2 = fluctuation_closed_form(es, psi, o)
            o_inf = diagonal_ensemble_mean(es, psi, o)
            gamma, _, _ = _fit_decay_rate(es, psi, o, o_inf, dos.value,
                                          cfg.time.n_points)
            delta_o2 = _window_variance_pauli(es.energies, o_aa, e0,
                                              cfg.microcanonical_window)
            return FDTRecord(tag, n, float(cfg.w_disorder), seed, delta2, gamma,
                             dos.value, delta_o2, chi=cfg.chi)

        for r in range(cfg.n_realizations):
            seed = cfg.initial_state.state_seed + r
            t1 = time.perf_counter()
            try:
                if cfg.initial_state.kind is InitialStateKind.RANDOM_EIGEN_SUPERPOSITION:
                    psi, _ = random_superposition_state(
                        es, basis, cfg.initial_state.count, seed,
                        cfg.initial_state.pool_window)
                else:
                    psi = random_product_configuration(basis, site, seed)
                records.append(one_record(psi, seed, "pxp_ergodic"))
                logs.append(TaskLog("fdt", float(n), r, seed,
                                    time.perf_counter() - t1, "ok"))
            except Exception as exc:
                logs.append(TaskLog("fdt", float(n), r, seed, time.perf_counter() - t1,
                                    "failed", f"{type(exc).__name__}: {exc}"))
        t1 = time.perf_counter()
        try:
            z2 = basis_state(basis, neel_config(n))
            scar_records.append(one_record(z2, cfg.base_seed, "pxp_scarred"))
            logs.append(TaskLog("fdt_scar", float(n), 0, cfg.base_seed,
                                time.perf_counter() - t1, "ok"))
        except Exception as exc:
            logs.append(TaskLog("fdt_scar", float(n), 0, cfg.base_seed,
                                time.perf_counter() - t1, "failed",
                                f"{type(exc).__name__}: {exc}"))
    all_records = records + scar_records
    if all_records:
        path = out / "fdt_records.csv"
        write_fdt_csv(all_records, path)
        outputs.append(path)
    if len(records) >= 3:
        chi, diag = fit_chi(records)
        path = out / "chi_fit.csv"
        write_csv(path, ["chi", "rms_residual", "n_points"],
                  [[chi, diag["rms_residual"], diag["n_points"]]])
        outputs.append(path)
    return logs, outputs


def _window_variance_pauli(energies, o_aa, e0, window_fraction, min_states=20):
    """Shell-averaged operator variance for an involutory observable
    (O^2 = 1): 1 - mean(O_aa)^2 over the shell."""
    width = float(energies[-1] - energies[0])
    half = window_fraction * width
    sel = np.abs(energies - e0) <= half
    while sel.sum() < min_states and half < width:
        half *= 2.0
        sel = np.abs(energies - e0) <= half
    m1 = float(o_aa[sel].mean())
    return 1.0 - m1 * m1


# ---------------------------------------------------------------------------
# entry point

_ANALYSES = {
    "levels": _run_levels,
    "entropy": _run_entropy,
    "dos": _run_dos,
    "qfi": _run_qfi,
    "flucts": _run_flucts,
    "pxp": _run_pxp,
}


def run_scenario(cfg: ScenarioConfig) -> RunReport:
    """Execute one configured scenario and write CSVs plus manifest.json."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.analysis not in _ANALYSES:
        raise ValueError(f"unknown analysis '{cfg.analysis}'; options: {sorted(_ANALYSES)}")
    t0 = time.perf_counter()
    logs, outputs = _ANALYSES[cfg.analysis](cfg, out)
    wall = time.perf_counter() - t0
    manifest = {
        "library_version": __version__,
        "config": _config_echo(cfg),
        "tasks": [vars(t) for t in logs],
        "outputs": [str(Path(p).name) for p in outputs],
        "total_wall_s": wall,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    failures = sum(1 for t in logs if t.status == "failed")
    return RunReport(out, logs, outputs, failures)


def _config_echo(cfg: ScenarioConfig) -> dict:
    echo = {}
    for key, val in vars(cfg).items():
        if isinstance(val, (ScenarioKind, InitialStateKind)):
            echo[key] = val.value
        elif hasattr(val, "__dict__"):
            echo[key] = {k: (v.value if isinstance(v, InitialStateKind) else v)
                         for k, v in vars(val).items()}
        else:
            echo[key] = val
    return echo
