"""Diagonalization and spectrum-level diagnostics.

Spacing statistics use a mid-spectrum window (central fraction of levels by
index, default 60%) where random-matrix universality applies. Unfolding is a
local mean-spacing normalization over a sliding window of raw spacings,
followed by an exact unit-mean rescale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg
from scipy.ndimage import uniform_filter1d

from .hilbert import SpinBasis
from .models import HamiltonianMatrix

DEGENERACY_REL_TOL = 1e-12
UNFOLD_WINDOW = 20


@dataclass
class EigenSystem:
    """Ascending eigenvalues and phase-fixed orthonormal eigenvectors."""

    energies: np.ndarray
    vectors: np.ndarray  # column mu <-> energies[mu]
    basis: Optional[SpinBasis] = None

    @property
    def dim(self) -> int:
        return len(self.energies)

    def verify(self, h: np.ndarray, residual_tol: float = 1e-9,
               ortho_tol: float = 1e-10) -> None:
        """Check reconstruction residual and orthonormality (test hook)."""
        scale = np.abs(self.energies).max()
        res = h @ self.vectors - self.vectors * self.energies
        if np.linalg.norm(res, axis=0).max() > residual_tol * max(scale, 1e-300):
            raise AssertionError("eigendecomposition residual too large")
        gram = self.vectors.conj().T @ self.vectors
        if np.max(np.abs(gram - np.eye(self.dim))) > ortho_tol:
            raise AssertionError("eigenvectors not orthonormal")


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column real positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    lead = vectors[idx, np.arange(vectors.shape[1])]
    if np.isrealobj(vectors):
        vectors[:, lead < 0] *= -1.0
        return vectors
    phase = lead / np.abs(lead)
    return vectors * phase.conj()


def diagonalize(h: Union[HamiltonianMatrix, np.ndarray]) -> EigenSystem:
    """Full dense Hermitian eigendecomposition, ascending energies.

    Real symmetric input takes the (much faster) real LAPACK path.
    """
    basis = None
    m = h
    if isinstance(h, HamiltonianMatrix):
        basis = h.basis
        m = h.entries
    if not np.isrealobj(m) and np.max(np.abs(m.imag)) == 0.0:
        m = m.real
    energies, vectors = scipy.linalg.eigh(m, driver="evd", check_finite=False)
    vectors = _fix_phases(vectors)
    return EigenSystem(energies=energies, vectors=vectors, basis=basis)


def eigenvalues_only(h: Union[HamiltonianMatrix, np.ndarray]) -> np.ndarray:
    """Ascending eigenvalues without eigenvectors (cheaper for statistics)."""
    m = h.entries if isinstance(h, HamiltonianMatrix) else h
    if not np.isrealobj(m) and np.max(np.abs(m.imag)) == 0.0:
        m = m.real
    return scipy.linalg.eigh(m, eigvals_only=True, check_finite=False)


@dataclass
class LevelStatistics:
    """Unfolded spacings, spacing-ratio values and their mean."""

    spacings: np.ndarray  # unit mean
    r_values: np.ndarray  # each in [0, 1]
    mean_r: float
    n_degenerate_excluded: int


@dataclass
class SpacingDistribution:
    bin_centers: np.ndarray
    density: np.ndarray
    ks_poisson: float
    ks_wigner_dyson: float
    stats: LevelStatistics


@dataclass
class DOSEstimate:
    energy: float
    value: float  # states per unit energy
    bandwidth: float


def _window(energies: np.ndarray, window: float) -> np.ndarray:
    e = np.sort(np.asarray(energies, dtype=float))
    n = len(e)
    drop = int(round(n * (1.0 - window) / 2.0))
    return e[drop:n - drop] if drop > 0 else e


def _energies_of(es) -> np.ndarray:
    return es.energies if isinstance(es, EigenSystem) else np.asarray(es, dtype=float)


def unfold_spacings(energies: np.ndarray, smooth_window: int = UNFOLD_WINDOW) -> np.ndarray:
    """Spacings normalized by a sliding local mean, rescaled to unit mean."""
    raw = np.diff(np.sort(energies))
    local = uniform_filter1d(raw, size=min(smooth_window, len(raw)), mode="nearest")
    s = raw / local
    return s / s.mean()


def _split_degenerate(energies: np.ndarray):
    """Raw spacings with exact degeneracies removed; returns (spacings, n_excluded)."""
    raw = np.diff(energies)
    width = energies[-1] - energies[0]
    degenerate = raw < DEGENERACY_REL_TOL * max(width, 1e-300)
    n_exc = int(degenerate.sum())
    if n_exc:
        warnings.warn(f"excluded {n_exc} degenerate spacings from level statistics")
    return raw, degenerate, n_exc


def level_statistics(es, window: float = 0.6) -> LevelStatistics:
    """Unfolded spacings plus spacing-ratio statistics over a mid-spectrum window.

    r_n = min(s_n, s_{n-1}) / max(s_n, s_{n-1}) on raw spacings (no unfolding
    needed); triplets touching a degenerate spacing are excluded.
    """
    e = _window(_energies_of(es), window)
    if len(e) < 3:
        raise ValueError("need at least 3 levels")
    raw, degenerate, n_exc = _split_degenerate(e)
    keep = ~(degenerate[:-1] | degenerate[1:])
    r = np.minimum(raw[:-1], raw[1:])[keep] / np.maximum(raw[:-1], raw[1:])[keep]
    spac = unfold_spacings(e)[~degenerate]
    spac = spac / spac.mean()
    return LevelStatistics(spacings=spac, r_values=r, mean_r=float(r.mean()),
                           n_degenerate_excluded=n_exc)


def r_statistic(es, window: float = 0.6) -> LevelStatistics:
    """Spacing-ratio statistics; `mean_r` is the headline number."""
    return level_statistics(es, window=window)


def poisson_spacing_cdf(s):
    return 1.0 - np.exp(-np.asarray(s, dtype=float))


def wigner_dyson_spacing_cdf(s):
    s = np.asarray(s, dtype=float)
    return 1.0 - np.exp(-np.pi * s * s / 4.0)


def _ks_distance(sample: np.ndarray, cdf) -> float:
    x = np.sort(sample)
    n = len(x)
    f = cdf(x)
    lo = np.arange(n) / n
    hi = np.arange(1, n + 1) / n
    return float(np.max(np.maximum(f - lo, hi - f)))


def level_spacing_distribution(es, window: float = 0.6, bins: int = 40,
                               s_max: float = 4.0) -> SpacingDistribution:
    """Histogram of unfolded spacings with KS distances to the two reference laws.

    References: Poisson P(s)=exp(-s) and the Wigner-Dyson surmise
    P(s) = (pi/2) s exp(-pi s^2/4), both at unit mean spacing.
    """
    e = _window(_energies_of(es), window)
    if len(e) < 100:
        raise ValueError("need at least 100 levels in the window")
    stats = level_statistics(e, window=1.0)
    s = stats.spacings
    density, edges = np.histogram(s, bins=bins, range=(0.0, s_max), density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return SpacingDistribution(
        bin_centers=centers,
        density=density,
        ks_poisson=_ks_distance(s, poisson_spacing_cdf),
        ks_wigner_dyson=_ks_distance(s, wigner_dyson_spacing_cdf),
        stats=stats,
    )


def dos_at_energy(es, e0: float, bandwidth: Optional[float] = None) -> DOSEstimate:
    """Gaussian-kernel density of states at e0, in states per unit energy.

    Default bandwidth is spectral_width / sqrt(dim).
    """
    e = _energies_of(es)
    if not e.min() <= e0 <= e.max():
        raise ValueError(f"energy {e0} outside spectral range [{e.min()}, {e.max()}]")
    width = e.max() - e.min()
    sigma = bandwidth if bandwidth is not None else width / np.sqrt(len(e))
    z = (e0 - e) / sigma
    val = float(np.exp(-0.5 * z * z).sum() / (sigma * np.sqrt(2.0 * np.pi)))
    return DOSEstimate(energy=float(e0), value=val, bandwidth=float(sigma))


def sample_goe(dim: int, seed: int) -> np.ndarray:
    """Eigenvalues of one GOE draw (A + A^T)/2 with standard normal entries."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    a = rng.standard_normal((dim, dim))
    return np.linalg.eigvalsh((a + a.T) / 2.0)
