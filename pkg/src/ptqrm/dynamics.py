"""Non-Hermitian time evolution, qubit observables and emission spectra.

Evolution is spectral by default: the initial state is expanded on the
biorthogonal eigenbasis and each component picks up ``exp(-i E t)``.  Near
an exceptional point the eigenvector matrix is ill-conditioned and the
evolution falls back to adaptive direct integration of the Schroedinger
equation.  Observables are always ratios (norm-compensated), so states may
be rescaled freely for overflow control.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, DefectiveMatrixError
from .model import EigenPair, exact_diagonalize, sigma_z_diagonal

__all__ = [
    "DynamicsTrace",
    "EmissionSpectrum",
    "Peak",
    "evolve",
    "evolve_in_basis",
    "sigma_z_series",
    "qubit_population",
    "emission_spectrum",
    "find_peaks",
]


class ConditioningFallbackWarning(UserWarning):
    """Spectral decomposition rejected; direct integration used instead."""


@dataclass
class DynamicsTrace:
    """Sampled qubit dynamics along a time grid (units 1/omega)."""

    times: np.ndarray
    sigma_z: np.ndarray
    norm: np.ndarray
    method: str                      # "spectral" or "direct"
    log_norm: np.ndarray | None = None


@dataclass
class EmissionSpectrum:
    """One-sided Fourier transform of a sampled real signal."""

    freqs: np.ndarray
    amplitude: np.ndarray
    magnitude: np.ndarray
    dt: float
    total_time: float
    window: str | None
    detrended: bool
    zero_pad: int

    @property
    def bin_width(self) -> float:
        """Native frequency resolution 1/T of the unpadded record."""
        return 1.0 / self.total_time


@dataclass
class Peak:
    """A spectral peak with sub-bin interpolated position and FWHM width."""

    position: float
    height: float
    fwhm: float


def sigma_z_series(states: np.ndarray, n_fock: int) -> np.ndarray:
    """Norm-compensated <sigma_z> for a (dim, n_times) array of states."""
    s = sigma_z_diagonal(n_fock)
    dens = np.abs(states) ** 2
    return (s @ dens) / dens.sum(axis=0)


def qubit_population(sigma_z: np.ndarray) -> np.ndarray:
    """Upper-level population (1 + <sigma_z>)/2."""
    return 0.5 * (1.0 + np.asarray(sigma_z))


def evolve(
    h: np.ndarray,
    initial: np.ndarray,
    times: np.ndarray,
    method: str = "auto",
    eigensystem: list[EigenPair] | None = None,
    cond_threshold: float = 1e10,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> DynamicsTrace:
    """Evolve an initial state and sample <sigma_z(t)> and the norm.

    Parameters
    ----------
    h : ndarray
        Hamiltonian in the package basis ordering.
    initial : ndarray
        Initial state vector (need not be normalized).
    times : ndarray
        Monotone output grid starting at t >= 0.
    method : str
        "spectral", "direct" or "auto" (spectral with a conditioning
        fallback to direct integration).
    eigensystem : list of EigenPair, optional
        Reuse a precomputed eigensystem for the spectral path.
    """
    times = np.asarray(times, dtype=float)
    initial = np.asarray(initial, dtype=complex)
    dim = initial.size
    if h.shape != (dim, dim):
        raise ConfigError("Hamiltonian/state dimension mismatch")
    n_fock = dim // 2 - 1

    if method not in ("auto", "spectral", "direct"):
        raise ConfigError(f"unknown evolution method {method!r}")

    if method in ("auto", "spectral"):
        try:
            pairs = eigensystem or exact_diagonalize(h, cond_threshold)
            return _evolve_spectral(pairs, initial, times, n_fock)
        except DefectiveMatrixError:
            if method == "spectral":
                raise
            warnings.warn(
                "eigenvector conditioning too poor for spectral evolution; "
                "falling back to direct integration",
                ConditioningFallbackWarning,
            )
    return _evolve_direct(h, initial, times, n_fock, rtol, atol)


def _evolve_spectral(pairs, initial, times, n_fock) -> DynamicsTrace:
    energies = np.array([p.energy for p in pairs])
    v = np.column_stack([p.right for p in pairs])
    amps = np.array([np.vdot(p.left, initial) for p in pairs])
    # shift the growing exponents so the scaled state stays bounded
    growth = energies.imag[None, :] * times[:, None]         # (nt, dim)
    shift = growth.max(axis=1)
    phases = np.exp(-1j * np.outer(energies.real, times)
                    + (growth.T - shift[None, :]))
    states = v @ (amps[:, None] * phases)
    scaled_norm = np.linalg.norm(states, axis=0)
    log_norm = np.log(scaled_norm) + shift
    with np.errstate(over="ignore"):
        norm = np.exp(log_norm)
    sz = sigma_z_series(states, n_fock)
    return DynamicsTrace(times=times.copy(), sigma_z=sz, norm=norm,
                         method="spectral", log_norm=log_norm)


def _evolve_direct(h, initial, times, n_fock, rtol, atol,
                   chunk: float = 20.0) -> DynamicsTrace:
    """Adaptive RK integration in renormalized chunks to avoid overflow."""

    def rhs(_t, y):
        return -1j * (h @ y)

    sz = np.empty(len(times))
    log_norm = np.empty(len(times))
    y = initial.astype(complex)
    carried = np.log(np.linalg.norm(y))
    y = y / np.linalg.norm(y)
    t_done = float(times[0])
    idx = 0
    if times[0] == 0.0:
        sz[0] = sigma_z_series(y[:, None], n_fock)[0]
        log_norm[0] = carried
        idx = 1
    while idx < len(times):
        t_end = min(t_done + chunk, float(times[-1]))
        sel = (times > t_done) & (times <= t_end)
        t_eval = np.unique(np.concatenate([times[sel], [t_end]]))
        sol = solve_ivp(rhs, (t_done, t_end), y, t_eval=t_eval,
                        method="RK45", rtol=rtol, atol=atol)
        if not sol.success:
            raise ConfigError(f"direct integration failed: {sol.message}")
        # the requested samples are the first sel.sum() entries of t_eval
        for j in range(int(sel.sum())):
            col = sol.y[:, j]
            sz[idx] = sigma_z_series(col[:, None], n_fock)[0]
            log_norm[idx] = carried + np.log(np.linalg.norm(col))
            idx += 1
        # restart from the chunk end, renormalized
        y_end = sol.y[:, -1]
        nrm = np.linalg.norm(y_end)
        carried += np.log(nrm)
        y = y_end / nrm
        t_done = t_end
    with np.errstate(over="ignore"):
        norm = np.exp(log_norm)
    return DynamicsTrace(times=times.copy(), sigma_z=sz, norm=norm,
                         method="direct", log_norm=log_norm)


def evolve_in_basis(
    energies: np.ndarray,
    vectors: np.ndarray,
    initial: np.ndarray,
    times: np.ndarray,
    n_fock: int,
) -> DynamicsTrace:
    """Evolve with an approximate eigenbasis (e.g. AA or CAA states).

    The initial state is expanded on the given (generally non-orthogonal)
    vectors by least squares; each component then evolves with its complex
    energy.  The least-squares residual should be negligible when enough
    manifolds participate.
    """
    energies = np.asarray(energies, dtype=complex)
    vectors = np.asarray(vectors, dtype=complex)
    coeffs, *_ = np.linalg.lstsq(vectors, np.asarray(initial, complex), rcond=None)
    times = np.asarray(times, dtype=float)
    growth = energies.imag[None, :] * times[:, None]
    shift = growth.max(axis=1)
    phases = np.exp(-1j * np.outer(energies.real, times)
                    + (growth.T - shift[None, :]))
    states = vectors @ (coeffs[:, None] * phases)
    scaled_norm = np.linalg.norm(states, axis=0)
    log_norm = np.log(scaled_norm) + shift
    with np.errstate(over="ignore"):
        norm = np.exp(log_norm)
    sz = sigma_z_series(states, n_fock)
    return DynamicsTrace(times=times.copy(), sigma_z=sz, norm=norm,
                         method="spectral", log_norm=log_norm)


def emission_spectrum(
    series: np.ndarray,
    dt: float,
    window: str | None = "hann",
    detrend: bool = True,
    zero_pad: int = 4,
) -> EmissionSpectrum:
    """Finite-record approximation of the one-sided Fourier transform.

    Approximates ``F(nu) = integral_0^T s(t) exp(-2 pi i nu t) dt`` on the
    uniform record ``series`` with spacing ``dt``.  Mean subtraction
    (``detrend``) suppresses the zero-frequency line; zero padding refines
    the frequency sampling without adding information.
    """
    s = np.asarray(series, dtype=float)
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if zero_pad < 1:
        raise ConfigError("zero_pad must be >= 1")
    if detrend:
        s = s - s.mean()
    if window is None:
        w = np.ones_like(s)
    elif window == "hann":
        w = np.hanning(len(s))
    else:
        raise ConfigError(f"unknown window {window!r}")
    padded = np.zeros(len(s) * zero_pad)
    padded[: len(s)] = s * w
    amplitude = dt * np.fft.rfft(padded)
    freqs = np.fft.rfftfreq(len(padded), dt)
    return EmissionSpectrum(
        freqs=freqs,
        amplitude=amplitude,
        magnitude=np.abs(amplitude),
        dt=dt,
        total_time=len(s) * dt,
        window=window,
        detrended=detrend,
        zero_pad=zero_pad,
    )


def find_peaks(spectrum: EmissionSpectrum, noise_floor: float | None = None) -> list[Peak]:
    """Local spectral maxima above a floor, with interpolated position/width.

    Positions use parabolic sub-bin interpolation; widths are full width at
    half maximum by linear interpolation of the half-height crossings.  The
    default floor is 5% of the global maximum.
    """
    y = spectrum.magnitude
    nu = spectrum.freqs
    if noise_floor is None:
        noise_floor = 0.05 * y.max() if y.size else 0.0
    peaks: list[Peak] = []
    for i in range(1, len(y) - 1):
        if not (y[i] > y[i - 1] and y[i] >= y[i + 1] and y[i] > noise_floor):
            continue
        denom = y[i - 1] - 2 * y[i] + y[i + 1]
        frac = 0.0 if denom == 0 else 0.5 * (y[i - 1] - y[i + 1]) / denom
        frac = float(np.clip(frac, -0.5, 0.5))
        pos = nu[i] + frac * (nu[1] - nu[0])
        height = y[i] - 0.25 * (y[i - 1] - y[i + 1]) * frac
        half = height / 2.0
        left = right = np.nan
        for j in range(i, 0, -1):
            if y[j - 1] < half <= y[j]:
                left = nu[j - 1] + (half - y[j - 1]) / (y[j] - y[j - 1]) * (nu[j] - nu[j - 1])
                break
            if y[j - 1] > y[j]:   # rising again: shoulder, no crossing
                break
        for j in range(i, len(y) - 1):
            if y[j + 1] < half <= y[j]:
                right = nu[j] + (y[j] - half) / (y[j] - y[j + 1]) * (nu[j + 1] - nu[j])
                break
            if y[j + 1] > y[j]:
                break
        fwhm = right - left if np.isfinite(left) and np.isfinite(right) else np.nan
        peaks.append(Peak(position=float(pos), height=float(height), fwhm=float(fwhm)))
    peaks.sort(key=lambda p: p.position)
    return peaks
