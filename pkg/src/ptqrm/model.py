"""Hamiltonian assembly and the exact-diagonalization oracle.

The model is a two-level system with energy splitting ``delta`` and a bias
(purely imaginary by default) coupled to a single bosonic mode::

    H = -(delta/2) sigma_x + (beta/2) sigma_z + omega a^dag a
        + g (a^dag + a) sigma_z

with ``beta = 1j*epsilon`` for the PT-symmetric model and ``beta = epsilon``
for its Hermitian asymmetric counterpart.

Basis ordering
--------------
States are ordered (qubit ⊗ Fock) with the qubit index slowest: index
``q*(n_fock+1) + n`` where ``q = 0`` is the sigma_z = +1 (upper) level and
``q = 1`` is the sigma_z = -1 (lower) level.  All state vectors exchanged
between modules use this ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, DefectiveMatrixError

__all__ = [
    "ModelParams",
    "TruncationConfig",
    "EigenPair",
    "Band",
    "build_hamiltonian",
    "exact_diagonalize",
    "diagonalize_converged",
    "track_bands",
    "sigma_z_diagonal",
    "initial_upper_vacuum",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the qubit-cavity Hamiltonian.

    Parameters
    ----------
    delta : float
        Qubit energy splitting (>= 0), in units of ``omega``.
    epsilon : float
        Bias magnitude (>= 0).
    g : float
        Qubit-cavity coupling strength (>= 0).
    omega : float
        Cavity frequency (> 0), default 1.
    bias_kind : str
        "imaginary" for the PT-symmetric bias ``1j*epsilon/2 * sigma_z``,
        "real" for the Hermitian asymmetric bias ``epsilon/2 * sigma_z``.
    """

    delta: float
    epsilon: float
    g: float
    omega: float = 1.0
    bias_kind: str = "imaginary"

    def __post_init__(self):
        if self.delta < 0 or self.epsilon < 0 or self.g < 0:
            raise ConfigError("delta, epsilon and g must be non-negative")
        if self.omega <= 0:
            raise ConfigError("omega must be positive")
        if self.bias_kind not in ("imaginary", "real"):
            raise ConfigError(f"unknown bias_kind {self.bias_kind!r}")

    @property
    def bias(self) -> complex:
        """The bias beta entering ``(beta/2) sigma_z``."""
        return 1j * self.epsilon if self.bias_kind == "imaginary" else complex(self.epsilon)

    def reduced(self) -> tuple[float, float, float]:
        """(delta, epsilon, g) rescaled to units omega = 1."""
        return self.delta / self.omega, self.epsilon / self.omega, self.g / self.omega

    def replace(self, **kwargs) -> "ModelParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class TruncationConfig:
    """Numerical truncation and tolerance settings.

    Attributes
    ----------
    n_fock : int
        Photon-number cutoff N; the Hamiltonian dimension is ``2*(N+1)``.
    n_series : int
        Hard cap on coefficient-series terms.
    series_tol : float
        Relative tail tolerance for series truncation.
    eig_tol : float
        Tolerance for eigensystem consistency checks.
    cond_threshold : float
        Eigenvector-matrix condition number above which the spectrum is
        treated as defective (near an exceptional point).
    """

    n_fock: int = 60
    n_series: int = 200
    series_tol: float = 1e-14
    eig_tol: float = 1e-8
    cond_threshold: float = 1e12

    def __post_init__(self):
        if self.n_fock < 0:
            raise ConfigError("n_fock must be >= 0")
        if self.n_series < 10:
            raise ConfigError("n_series must be >= 10")
        if self.series_tol <= 0 or self.eig_tol <= 0:
            raise ConfigError("tolerances must be positive")


@dataclass
class EigenPair:
    """One eigenvalue with its right and left eigenvectors.

    Left vectors are stored so that ``np.vdot(left_m, right_n) = delta_mn``
    exactly (rows of the inverse right-eigenvector matrix, conjugated).
    ``cond`` is the condition number of the full right-eigenvector matrix,
    shared by all pairs of one eigensystem.
    """

    energy: complex
    right: np.ndarray
    left: np.ndarray
    cond: float


@dataclass
class Band:
    """A continuously tracked eigenvalue branch over a parameter sweep."""

    start: int                       # index of the first grid point covered
    grid: np.ndarray                 # parameter values covered
    energies: np.ndarray             # complex eigenvalue along the band
    state_indices: np.ndarray        # spectrum index at each covered point
    ep_adjacent: bool = False        # real pair merged into a conjugate pair
    split: bool = False              # band terminated by an overlap dropout
    ambiguous_links: int = 0         # links whose competing overlaps differ < 1e-3


def build_hamiltonian(params: ModelParams, trunc: TruncationConfig) -> np.ndarray:
    """Assemble the Hamiltonian on the truncated Fock ⊗ qubit basis.

    Returns a complex square matrix of dimension ``2*(n_fock+1)`` in the
    (qubit slowest) basis ordering documented in the module docstring.
    """
    n = trunc.n_fock + 1
    num = np.arange(n, dtype=float)
    a = np.diag(np.sqrt(num[1:]), 1)
    x = a + a.T
    eye = np.eye(n)
    h_cav = params.omega * np.diag(num)
    h = np.zeros((2 * n, 2 * n), dtype=complex)
    half_bias = params.bias / 2.0
    h[:n, :n] = h_cav + params.g * x + half_bias * eye
    h[n:, n:] = h_cav - params.g * x - half_bias * eye
    h[:n, n:] = -params.delta / 2.0 * eye
    h[n:, :n] = -params.delta / 2.0 * eye
    return h


def exact_diagonalize(h: np.ndarray, cond_threshold: float = 1e12) -> list[EigenPair]:
    """Full biorthogonal eigensystem of a (generally non-Hermitian) matrix.

    Pairs are sorted by ascending real part of the eigenvalue, ties broken
    by ascending imaginary part.  Right vectors have unit 2-norm; left
    vectors are the conjugated rows of the inverse right-eigenvector matrix,
    so biorthonormality holds by construction.

    Raises
    ------
    DefectiveMatrixError
        If the right-eigenvector matrix condition number exceeds
        ``cond_threshold`` (typical near an exceptional point).
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ConfigError("exact_diagonalize expects a square matrix")
    vals, vecs = np.linalg.eig(h)
    # round the real parts so conjugate pairs (equal Re up to noise) are
    # ordered deterministically by their imaginary parts
    order = np.lexsort((vals.imag, np.round(vals.real, 10)))
    vals = vals[order]
    vecs = vecs[:, order]
    cond = float(np.linalg.cond(vecs))
    if cond > cond_threshold:
        raise DefectiveMatrixError(
            f"eigenvector matrix condition number {cond:.3e} exceeds {cond_threshold:.3e}"
        )
    lefts = np.linalg.inv(vecs).conj()
    return [
        EigenPair(energy=vals[k], right=vecs[:, k], left=lefts[k, :], cond=cond)
        for k in range(len(vals))
    ]


def diagonalize_converged(
    params: ModelParams,
    trunc: TruncationConfig,
    e_cut: float = 8.0,
    conv_tol: float = 1e-8,
    n_step: int = 20,
    n_max: int = 400,
) -> list[EigenPair]:
    """Diagonalize, raising ``n_fock`` until low-lying eigenvalues converge.

    The cutoff is increased in steps of ``n_step`` photons until every
    eigenvalue with ``Re E < e_cut`` moves by less than ``conv_tol`` under a
    further increase.  Returns the eigensystem at the converged cutoff.
    """
    n = trunc.n_fock
    pairs = exact_diagonalize(
        build_hamiltonian(params, replace(trunc, n_fock=n)), trunc.cond_threshold
    )
    while n <= n_max:
        bigger = exact_diagonalize(
            build_hamiltonian(params, replace(trunc, n_fock=n + n_step)),
            trunc.cond_threshold,
        )
        lo = [p.energy for p in pairs if p.energy.real < e_cut]
        lo_big = np.array([p.energy for p in bigger])
        drift = max(
            (np.abs(lo_big - e).min() for e in lo), default=0.0
        )
        if drift < conv_tol:
            return pairs
        pairs, n = bigger, n + n_step
    raise ConfigError(f"eigenvalues below e_cut={e_cut} not converged by n_fock={n_max}")


def eigenvalues(pairs: list[EigenPair]) -> np.ndarray:
    """Eigenvalues of a pair list as a complex array."""
    return np.array([p.energy for p in pairs])


def track_bands(
    grid: np.ndarray,
    spectra: list[list[EigenPair]],
    overlap_floor: float = 0.5,
    ambiguity_margin: float = 1e-3,
    im_floor: float = 1e-8,
) -> list[Band]:
    """Link eigenvalues across a monotone parameter sweep into bands.

    States at adjacent grid points are matched by maximising the total
    right-eigenvector overlap magnitude (optimal assignment).  A link whose
    overlap falls below ``overlap_floor`` terminates the band and starts a
    new one (flagged ``split``); a link whose best and second-best candidate
    overlaps differ by less than ``ambiguity_margin`` increments the band's
    ``ambiguous_links`` counter.  A band whose eigenvalue changes from
    essentially real to complex along the sweep is flagged ``ep_adjacent``.
    """
    grid = np.asarray(grid, dtype=float)
    if len(grid) != len(spectra):
        raise ConfigError("grid and spectra lengths differ")
    n_states = len(spectra[0])
    if any(len(s) != n_states for s in spectra):
        raise ConfigError("spectra must have a uniform number of states")

    # chains[i] = list of (grid index, state index); active maps state -> chain
    chains: list[dict] = []
    active: dict[int, int] = {}
    for s in range(n_states):
        chains.append({"links": [(0, s)], "split": False, "ambiguous": 0})
        active[s] = s

    for k in range(len(grid) - 1):
        va = np.column_stack([p.right for p in spectra[k]])
        vb = np.column_stack([p.right for p in spectra[k + 1]])
        overlap = np.abs(va.conj().T @ vb)
        rows, cols = linear_sum_assignment(-overlap)
        new_active: dict[int, int] = {}
        for r, c in zip(rows, cols):
            chain = chains[active[r]]
            best = overlap[r, c]
            competitors = np.delete(overlap[r], c)
            if competitors.size and best - competitors.max() < ambiguity_margin:
                chain["ambiguous"] += 1
            if best < overlap_floor:
                chain["split"] = True
                chains.append({"links": [(k + 1, c)], "split": False, "ambiguous": 0})
                new_active[c] = len(chains) - 1
            else:
                chain["links"].append((k + 1, c))
                new_active[c] = active[r]
        active = new_active

    bands = []
    for chain in chains:
        links = chain["links"]
        gi = np.array([i for i, _ in links])
        si = np.array([s for _, s in links])
        energies = np.array([spectra[i][s].energy for i, s in links])
        was_real = np.abs(energies.imag) < im_floor
        ep_adjacent = bool(np.any(was_real[:-1] & ~was_real[1:]) or
                           np.any(~was_real[:-1] & was_real[1:]))
        bands.append(
            Band(
                start=int(gi[0]),
                grid=grid[gi],
                energies=energies,
                state_indices=si,
                ep_adjacent=ep_adjacent,
                split=chain["split"],
                ambiguous_links=chain["ambiguous"],
            )
        )
    return bands


def sigma_z_diagonal(n_fock: int) -> np.ndarray:
    """Diagonal of sigma_z ⊗ identity in the package basis ordering."""
    n = n_fock + 1
    return np.concatenate([np.ones(n), -np.ones(n)])


def initial_upper_vacuum(n_fock: int) -> np.ndarray:
    """Qubit upper level ⊗ photon vacuum, the conventional VRS initial state."""
    psi = np.zeros(2 * (n_fock + 1), dtype=complex)
    psi[0] = 1.0
    return psi
