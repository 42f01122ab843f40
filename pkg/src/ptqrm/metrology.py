"""Quantum Fisher information and ground-state preparation-time bounds.

The pure-state QFI ``F = 4 (<dpsi|dpsi> - |<dpsi|psi>|^2)`` is evaluated
numerically by phase-aligned central differences with a Richardson
consistency check, and analytically in closed form for the bare two-level
system and for the cavity-coupled model at the manifold-diagonal level.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .approx import coupling_D
from .errors import AtEPError, ConfigError, GapClosedError, PhaseAlignmentError, PtqrmError
from .model import ModelParams, TruncationConfig, build_hamiltonian, exact_diagonalize

__all__ = [
    "QfiResult",
    "PrepTimeResult",
    "qfi_numeric",
    "qfi_nhtls_analytic",
    "qfi_ptqrm_aa_analytic",
    "qfi_surface",
    "prep_time",
    "nhtls_ground_state",
    "aa_two_level_state",
    "ed_state_provider",
    "ed_gap",
]


@dataclass
class QfiResult:
    """QFI samples along one estimated-parameter grid."""

    parameter: str
    grid: np.ndarray
    values: np.ndarray
    state_index: int
    method: str           # numeric_exact | numeric_aa | analytic_nhtls | analytic_ptqrm_aa


@dataclass
class PrepTimeResult:
    """Adiabatic preparation-time lower bound T = integral d(lambda)/gap."""

    lambda_c: float
    time: float
    gap_samples: np.ndarray
    lambda_samples: np.ndarray
    quad_error: float


def _normalize(psi: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(psi)
    if n == 0:
        raise ConfigError("zero state from provider")
    return psi / n


def _aligned(psi: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Rotate a state so its overlap with ``ref`` is real positive."""
    ov = np.vdot(ref, psi)
    if abs(ov) < 0.5:
        raise PhaseAlignmentError(
            f"state overlap {abs(ov):.3f} < 0.5; discontinuity (EP crossing?)")
    return psi * (abs(ov) / ov)


def qfi_numeric(
    state_provider: Callable[[float], np.ndarray],
    lam0: float,
    h: float | None = None,
    consistency_tol: float = 1e-4,
) -> float:
    """Pure-state QFI by phase-aligned central differences.

    Neighbouring states are phase-rotated so their overlap with the state
    at ``lam0`` is real positive before differencing.  The estimate is
    repeated at half step and Richardson-extrapolated; the two estimates
    must agree to ``consistency_tol`` relative.

    Raises
    ------
    PhaseAlignmentError
        If a neighbouring state overlaps the central one by < 0.5.
    PtqrmError
        If the two step sizes disagree beyond ``consistency_tol``.
    """
    if h is None:
        h = 1e-4 * (1.0 + abs(lam0))
    psi0 = _normalize(np.asarray(state_provider(lam0), complex))

    def estimate(step: float) -> float:
        plus = _aligned(_normalize(np.asarray(state_provider(lam0 + step), complex)), psi0)
        minus = _aligned(_normalize(np.asarray(state_provider(lam0 - step), complex)), psi0)
        dpsi = (plus - minus) / (2.0 * step)
        return 4.0 * float(np.vdot(dpsi, dpsi).real - abs(np.vdot(dpsi, psi0)) ** 2)

    f_h = estimate(h)
    f_h2 = estimate(h / 2.0)
    scale = max(abs(f_h2), 1e-30)
    if abs(f_h - f_h2) > consistency_tol * scale:
        raise PtqrmError(
            f"QFI finite-difference inconsistency: {f_h:.6e} vs {f_h2:.6e}")
    # Richardson extrapolation cancels the O(h^2) error of both estimates
    return (4.0 * f_h2 - f_h) / 3.0


def qfi_nhtls_analytic(delta: float, epsilon: float) -> float:
    """Closed-form bias-estimation QFI of the bare non-Hermitian qubit.

    Below the EP at ``eps = delta`` the ground state is
    ``(1, exp(i arcsin(eps/delta))) / sqrt(2)``, giving
    ``F = 1 / (delta^2 - eps^2)``; above the EP
    ``F = delta^2 / (eps^2 (eps^2 - delta^2))``, identical for both
    members of the conjugate pair.
    """
    if abs(epsilon - delta) < 1e-12:
        raise AtEPError("QFI diverges at epsilon = delta")
    if epsilon <= delta:
        return 1.0 / (delta**2 - epsilon**2)
    return delta**2 / (epsilon**2 * (epsilon**2 - delta**2))


def qfi_ptqrm_aa_analytic(delta: float, epsilon: float, g: float) -> float:
    """Closed-form bias-estimation QFI at the manifold-diagonal level.

    The cavity coupling renormalizes the splitting to ``delta exp(-2g^2)``,
    moving the EP to ``eps = delta exp(-2g^2)`` and enhancing the near-EP
    QFI by ``exp(2g^2)`` relative to the bare qubit.
    """
    eff = delta * np.exp(-2.0 * g * g)
    if abs(epsilon - eff) < 1e-12:
        raise AtEPError("QFI diverges at epsilon = delta*exp(-2 g^2)")
    if epsilon <= eff:
        return 1.0 / (delta**2 * np.exp(-4.0 * g * g) - epsilon**2)
    return (delta**2 - g**2) / (
        epsilon**2 * (epsilon**2 - delta**2 * np.exp(-4.0 * g * g)))


def nhtls_ground_state(delta: float, epsilon: float) -> np.ndarray:
    """Normalized ground right eigenvector of the bare non-Hermitian qubit.

    The qubit Hamiltonian is ``-(delta/2) sigma_x + (i eps/2) sigma_z``;
    "ground" selects the eigenvalue smallest by (Re, Im) ordering.
    """
    h = np.array([[0.5j * epsilon, -0.5 * delta],
                  [-0.5 * delta, -0.5j * epsilon]], dtype=complex)
    vals, vecs = np.linalg.eig(h)
    order = np.lexsort((vals.imag, np.round(vals.real, 10)))
    return _normalize(vecs[:, order[0]])


def aa_two_level_state(delta: float, epsilon: float, g: float, m: int = 0,
                       index: int = 0) -> np.ndarray:
    """Manifold-diagonal eigenvector in its effective two-level representation.

    The m-th manifold block is the bare-qubit problem with splitting
    ``2 D_mm``; its eigenvectors over the (plus, minus) displaced manifold
    states are returned as orthonormal-coordinate two-vectors, matching the
    representation in which the closed-form QFI is derived.
    """
    d = coupling_D(m, m, delta, g)
    h = np.array([[0.5j * epsilon, -d], [-d, -0.5j * epsilon]], dtype=complex)
    vals, vecs = np.linalg.eig(h)
    order = np.lexsort((vals.imag, np.round(vals.real, 10)))
    return _normalize(vecs[:, order[index]])


def ed_state_provider(
    params: ModelParams,
    parameter: str,
    trunc: TruncationConfig,
    state_index: int = 0,
    side: str = "right",
) -> Callable[[float], np.ndarray]:
    """Exact-diagonalization eigenstate as a function of one parameter.

    ``parameter`` is a ModelParams field name ("g", "epsilon", or "delta");
    ``state_index`` counts eigenvalues in (Re, Im) order (0 = ground).
    ``side`` selects the right or the left eigenvector.
    """
    if parameter not in ("g", "epsilon", "delta"):
        raise ConfigError("parameter must be 'g', 'epsilon' or 'delta'")
    if side not in ("right", "left"):
        raise ConfigError("side must be 'right' or 'left'")

    def provider(lam: float) -> np.ndarray:
        p = params.replace(**{parameter: float(lam)})
        pairs = exact_diagonalize(build_hamiltonian(p, trunc), trunc.cond_threshold)
        pair = pairs[state_index]
        vec = pair.right if side == "right" else pair.left
        return _normalize(vec)

    return provider


def ed_gap(params: ModelParams, parameter: str, trunc: TruncationConfig,
           upper: int = 1, lower: int = 0) -> Callable[[float], float]:
    """Spectral gap |E_upper - E_lower| as a function of one parameter.

    For complex-conjugate (broken-phase) pairs the gap is the modulus of
    the complex difference.
    """
    def gap(lam: float) -> float:
        p = params.replace(**{parameter: float(lam)})
        pairs = exact_diagonalize(build_hamiltonian(p, trunc), trunc.cond_threshold)
        return abs(pairs[upper].energy - pairs[lower].energy)

    return gap


def qfi_surface(
    g_grid: np.ndarray,
    eps_grid: np.ndarray,
    delta: float,
    trunc: TruncationConfig,
    reference: str = "hermitian",
    state_index: int = 0,
    parameter: str | None = None,
    mask_cells: float = 2.0,
) -> tuple[np.ndarray, np.ndarray]:
    """QFI difference surface F_PTQRM - F_reference over a (g, eps) grid.

    ``reference = "hermitian"`` compares against the real-bias model with
    the coupling as the estimated parameter; ``reference = "nhtls"``
    compares against the bare non-Hermitian qubit with the bias as the
    estimated parameter.  Cells within ``mask_cells`` grid cells of the
    manifold-diagonal EP curve ``eps = delta exp(-2 g^2)``, and cells where
    the numeric evaluation fails, are masked.

    Returns
    -------
    diff : ndarray, shape (len(eps_grid), len(g_grid))
    mask : boolean ndarray, True where the cell is masked.
    """
    if reference not in ("hermitian", "nhtls"):
        raise ConfigError("reference must be 'hermitian' or 'nhtls'")
    parameter = parameter or ("g" if reference == "hermitian" else "epsilon")
    g_grid = np.asarray(g_grid, float)
    eps_grid = np.asarray(eps_grid, float)
    diff = np.full((len(eps_grid), len(g_grid)), np.nan)
    mask = np.zeros_like(diff, dtype=bool)
    cell = (eps_grid[1] - eps_grid[0]) if len(eps_grid) > 1 else 1.0

    for i, eps in enumerate(eps_grid):
        for j, g in enumerate(g_grid):
            ep_curve = delta * np.exp(-2.0 * g * g)
            if abs(eps - ep_curve) < mask_cells * cell:
                mask[i, j] = True
                continue
            base = ModelParams(delta=delta, epsilon=eps, g=g, bias_kind="imaginary")
            try:
                lam0 = getattr(base, parameter)
                f_pt = qfi_numeric(
                    ed_state_provider(base, parameter, trunc, state_index), lam0)
                if reference == "hermitian":
                    herm = base.replace(bias_kind="real")
                    f_ref = qfi_numeric(
                        ed_state_provider(herm, parameter, trunc, state_index), lam0)
                else:
                    f_ref = qfi_numeric(
                        lambda e: nhtls_ground_state(delta, e), eps)
            except PtqrmError:
                mask[i, j] = True
                continue
            diff[i, j] = f_pt - f_ref
    return diff, mask


def prep_time(
    gap: Callable[[float], float],
    lambda_c: float,
    lambda_start: float = 0.0,
    n_samples: int = 201,
    gap_floor: float = 1e-10,
) -> PrepTimeResult:
    """Adiabatic lower bound on the ground-state preparation time.

    Integrates ``1/gap`` from ``lambda_start`` to ``lambda_c`` by adaptive
    quadrature.  The gap is pre-sampled on a uniform grid to detect
    closings inside the interval.

    Raises
    ------
    GapClosedError
        If any sampled gap falls below ``gap_floor``.
    """
    if not lambda_c > lambda_start:
        raise ConfigError("lambda_c must exceed lambda_start")
    lams = np.linspace(lambda_start, lambda_c, n_samples)
    gaps = np.array([gap(l) for l in lams])
    if np.any(gaps < gap_floor):
        raise GapClosedError(
            f"gap below {gap_floor:.1e} inside [{lambda_start}, {lambda_c}]")
    value, err = quad(lambda l: 1.0 / gap(l), lambda_start, lambda_c, limit=200)
    return PrepTimeResult(lambda_c=float(lambda_c), time=float(value),
                          gap_samples=gaps, lambda_samples=lams,
                          quad_error=float(err))
