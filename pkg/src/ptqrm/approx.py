"""Manifold-diagonal and nearest-neighbour-corrected analytic eigenpairs.

The Hamiltonian written in the two displaced-oscillator number bases couples
manifold ``m`` of one displacement to manifold ``n`` of the other through a
Laguerre-polynomial overlap ``D_mn``.  Keeping only same-manifold couplings
gives a closed-form 2x2 eigenproblem per manifold (the adiabatic
approximation, AA); adding the nearest-neighbour manifolds gives a 6x6
block (4x4 for m = 0) whose eigenvalues correct both energies and states
(the CAA).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaln

from .errors import ConfigError, SelectionAmbiguousError, TruncationTailError
from .model import ModelParams

__all__ = [
    "OverlapTable",
    "ApproxState",
    "CaaBlock",
    "laguerre_assoc",
    "overlap_D",
    "coupling_D",
    "overlap_table",
    "aa_pair",
    "caa_pair",
    "caa_block",
    "displaced_number_states",
    "state_to_fock",
]


@dataclass
class OverlapTable:
    """Symmetric displaced-basis overlap matrix D_mn for m, n <= max_m."""

    d: np.ndarray
    delta: float
    g: float


@dataclass
class ApproxState:
    """An approximate eigenpair member over a few manifolds.

    ``manifolds[j]`` indexes the displaced-number-state manifold carrying
    the coefficients ``u[j]`` (plus-displaced component) and ``v[j]``
    (minus-displaced component, before the alternating-sign convention
    applied during Fock reconstruction).
    """

    m: int
    branch: str                 # "plus" (lower) or "minus" (upper)
    method: str                 # "aa" or "caa"
    manifolds: np.ndarray
    u: np.ndarray
    v: np.ndarray
    energy: complex
    ep_degenerate: bool = False
    norm: complex | None = None  # normalization applied at Fock reconstruction


@dataclass
class CaaBlock:
    """The nearest-neighbour coupling block for one manifold.

    ``matrix`` is the energy-independent part; eigenvalues E make the
    full determinant (with ``-E`` added on the diagonal) vanish.
    """

    matrix: np.ndarray
    m: int
    manifolds: np.ndarray


def laguerre_assoc(m: int, alpha: int, x: float) -> float:
    """Associated Laguerre polynomial L_m^alpha(x) by the degree recurrence."""
    if m < 0:
        raise ConfigError("degree m must be >= 0")
    if m == 0:
        return 1.0
    prev = 1.0
    cur = 1.0 + alpha - x
    for k in range(1, m):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return float(cur)


def overlap_D(m: int, n: int, delta: float, g: float) -> float:
    """Displaced-basis tunnelling element D_mn (symmetric in m, n).

    ``D_mn = (delta/2) (2g)^(n-m) exp(-2g^2) sqrt(m!/n!) L_m^(n-m)(4g^2)``
    for n >= m; factorial ratios go through log-gamma to stay finite for
    large indices.
    """
    if m < 0 or n < 0:
        raise ConfigError("manifold indices must be >= 0")
    if n < m:
        m, n = n, m
    g2 = g * g
    log_fact = 0.5 * (gammaln(m + 1) - gammaln(n + 1))
    lag = laguerre_assoc(m, n - m, 4.0 * g2)
    return float(0.5 * delta * (2.0 * g) ** (n - m) * np.exp(-2.0 * g2 + log_fact) * lag)


def coupling_D(m: int, n: int, delta: float, g: float) -> float:
    """Signed tunnelling element entering the coupled manifold equations.

    Projecting the Hamiltonian on the two displaced number bases (with the
    alternating-sign convention on the minus family) gives the coupling
    ``(-1)^min(m,n) D_mn``; the sign is invisible at the single-manifold
    level (only D^2 enters) but fixes the relative sign of the
    nearest-neighbour couplings.  The full signed matrix reproduces the
    exact spectrum as the manifold window grows.
    """
    return float((-1) ** min(m, n)) * overlap_D(m, n, delta, g)


def overlap_table(max_m: int, delta: float, g: float) -> OverlapTable:
    """All D_mn with m, n <= max_m."""
    d = np.empty((max_m + 1, max_m + 1))
    for m in range(max_m + 1):
        for n in range(m, max_m + 1):
            d[m, n] = d[n, m] = overlap_D(m, n, delta, g)
    return OverlapTable(d=d, delta=delta, g=g)


def _check_imaginary(params: ModelParams):
    if params.bias_kind != "imaginary":
        raise ConfigError("the analytic approximations assume the imaginary bias")


def aa_pair(m: int, params: ModelParams) -> tuple[ApproxState, ApproxState]:
    """Manifold-diagonal (adiabatic) eigenpair of manifold ``m``.

    Returns the (plus, minus) states with energies
    ``E_pm = m - g^2 -/+ sqrt(4 D_mm^2 - eps^2)/2`` in the unbroken regime
    (``eps <= 2 D_mm``) and the conjugate pair
    ``E_pm = m - g^2 -/+ i sqrt(eps^2 - 4 D_mm^2)/2`` otherwise, in units of
    ``omega``.  At ``eps = 2 D_mm`` the two states coincide and are flagged
    ``ep_degenerate``.
    """
    _check_imaginary(params)
    if m < 0:
        raise ConfigError("manifold index must be >= 0")
    delta, eps, g = params.reduced()
    d_mm = coupling_D(m, m, delta, g)
    base = m - g * g
    disc = 4.0 * d_mm * d_mm - eps * eps
    if disc >= 0:
        gap = 0.5 * np.sqrt(disc)
        energies = (base - gap + 0j, base + gap + 0j)
    else:
        gap = 0.5 * np.sqrt(-disc)
        energies = (base - 1j * gap, base + 1j * gap)
    degenerate = disc == 0.0

    states = []
    for branch, energy in zip(("plus", "minus"), energies):
        u, v = _two_level_vector(base, eps, d_mm, energy)
        states.append(
            ApproxState(
                m=m, branch=branch, method="aa",
                manifolds=np.array([m]),
                u=np.array([u]), v=np.array([v]),
                energy=energy * params.omega,
                ep_degenerate=degenerate,
            )
        )
    return states[0], states[1]


def _two_level_vector(base: float, eps: float, d: float, energy: complex):
    """Normalized null vector of the manifold-diagonal 2x2 block."""
    if abs(d) < 1e-300:
        return (1.0 + 0j, 0j) if abs(base + 0.5j * eps - energy) < abs(
            base - 0.5j * eps - energy) else (0j, 1.0 + 0j)
    u = base - 0.5j * eps - energy
    v = d + 0j
    norm = np.sqrt(abs(u) ** 2 + abs(v) ** 2)
    return u / norm, v / norm


def caa_block(m: int, params: ModelParams) -> CaaBlock:
    """Energy-independent nearest-neighbour coupling block for manifold m."""
    _check_imaginary(params)
    if m < 0:
        raise ConfigError("manifold index must be >= 0")
    delta, eps, g = params.reduced()
    manifolds = np.arange(max(m - 1, 0), m + 2)
    k = len(manifolds)
    diag = manifolds - g * g
    dblk = np.empty((k, k))
    for i, mi in enumerate(manifolds):
        for j, mj in enumerate(manifolds):
            dblk[i, j] = coupling_D(int(mi), int(mj), delta, g)
    mat = np.zeros((2 * k, 2 * k), dtype=complex)
    mat[:k, :k] = np.diag(diag + 0.5j * eps)
    mat[k:, k:] = np.diag(diag - 0.5j * eps)
    mat[:k, k:] = -dblk
    mat[k:, :k] = -dblk
    return CaaBlock(matrix=mat, m=m, manifolds=manifolds)


def caa_pair(
    m: int, params: ModelParams, selection_margin: float = 1e-6
) -> tuple[ApproxState, ApproxState]:
    """Nearest-neighbour-corrected eigenpair of manifold ``m``.

    All six block roots (four for m = 0) are obtained as eigenvalues of the
    energy-independent block; the two returned are those nearest the
    manifold-diagonal pair, assigned optimally so the pair gets distinct
    roots.  Sorting the real roots reproduces the positional rule (third and
    fourth of six for m > 0, first and second of four for m = 0).

    Raises
    ------
    SelectionAmbiguousError
        If an unselected root approaches an AA value as closely as the
        selected one (margin below ``selection_margin``).
    """
    block = caa_block(m, params)
    roots, vecs = np.linalg.eig(block.matrix)
    aa_plus, aa_minus = aa_pair(m, params)
    targets = np.array([aa_plus.energy, aa_minus.energy]) / params.omega

    dist = np.abs(targets[:, None] - roots[None, :])
    rows, cols = linear_sum_assignment(dist)
    chosen = {int(c) for c in cols}
    for r, c in zip(rows, cols):
        others = [dist[r, j] for j in range(len(roots)) if j not in chosen]
        if others and min(others) - dist[r, c] < selection_margin:
            raise SelectionAmbiguousError(
                f"root selection for manifold {m} not separated by {selection_margin}")

    k = len(block.manifolds)
    out = []
    for (r, c), branch, aa_state in zip(
        sorted(zip(rows, cols)), ("plus", "minus"), (aa_plus, aa_minus)
    ):
        vec = vecs[:, c]
        nrm = np.linalg.norm(vec)
        out.append(
            ApproxState(
                m=m, branch=branch, method="caa",
                manifolds=block.manifolds.copy(),
                u=vec[:k] / nrm, v=vec[k:] / nrm,
                energy=roots[c] * params.omega,
                ep_degenerate=aa_state.ep_degenerate,
            )
        )
    return out[0], out[1]


def displaced_number_states(
    max_n: int, g: float, n_fock: int, displacement_sign: int
) -> np.ndarray:
    """Fock-basis columns of the displaced number states |n>_{A±}, n <= max_n.

    ``displacement_sign = +1`` selects the ``A_+ = a + g`` family (vacuum is
    the coherent state of amplitude ``-g``), ``-1`` the ``A_-`` family.
    Column ``n`` is built by ladder steps ``(a^dag ± g)/sqrt(n)`` from the
    displaced vacuum.
    """
    if displacement_sign not in (+1, -1):
        raise ConfigError("displacement_sign must be +1 or -1")
    dim = n_fock + 1
    cols = np.zeros((dim, max_n + 1), dtype=float)
    ks = np.arange(dim, dtype=float)
    amp = -displacement_sign * g
    log_vac = -0.5 * g * g + ks * np.log(np.abs(amp) + 1e-300) - 0.5 * gammaln(ks + 1)
    vac = np.sign(amp) ** np.arange(dim) * np.exp(log_vac)
    if g == 0.0:
        vac = np.zeros(dim)
        vac[0] = 1.0
    cols[:, 0] = vac
    sqrt_k = np.sqrt(ks)
    for n in range(1, max_n + 1):
        prev = cols[:, n - 1]
        raised = np.zeros(dim)
        raised[1:] = sqrt_k[1:] * prev[:-1]
        cols[:, n] = (raised + displacement_sign * g * prev) / np.sqrt(n)
    return cols


def state_to_fock(
    state: ApproxState,
    params: ModelParams,
    n_fock: int,
    tail_tol: float = 1e-12,
) -> np.ndarray:
    """Expand an approximate state on the truncated Fock ⊗ qubit basis.

    The minus-displaced component carries the alternating sign ``(-1)^n``
    fixed by the two-basis expansion convention.  The result is normalized
    to unit 2-norm; the applied normalization is recorded on the state.

    Raises
    ------
    TruncationTailError
        If any participating displaced state loses more than ``tail_tol``
        of its norm to the Fock cutoff.
    """
    g = params.g / params.omega
    max_n = int(state.manifolds.max())
    plus = displaced_number_states(max_n, g, n_fock, +1)
    minus = displaced_number_states(max_n, g, n_fock, -1)
    used = state.manifolds.astype(int)
    norms = np.concatenate([np.linalg.norm(plus[:, used], axis=0),
                            np.linalg.norm(minus[:, used], axis=0)])
    if np.any(1.0 - norms ** 2 > tail_tol):
        raise TruncationTailError(
            f"displaced-state tail exceeds {tail_tol:.1e} at n_fock={n_fock}")
    dim = n_fock + 1
    vec = np.zeros(2 * dim, dtype=complex)
    for j, n in enumerate(used):
        vec[:dim] += state.u[j] * plus[:, n]
        vec[dim:] += ((-1) ** n) * state.v[j] * minus[:, n]
    nrm = np.linalg.norm(vec)
    if nrm == 0:
        raise ConfigError("zero approximate state")
    state.norm = complex(1.0 / nrm)
    return vec / nrm
