"""Displaced-operator series, transcendental spectral functions and EP search.

Expanding eigenstates in the two displaced-oscillator number bases gives two
coefficient families (``e, f`` for the +g displacement and ``c, d`` for -g),
each obeying a three-term recursion in the manifold index.  Requiring both
expansions to describe the same eigenstate produces a transcendental
function of the energy whose zeros are the exact eigenvalues; on the real
axis an equivalent manifestly real form exists whose simultaneous zero with
its energy derivative locates exceptional points.

All series are evaluated in units ``omega = 1`` (parameters are rescaled on
entry) and coefficients are stored premultiplied by ``g**n``, which keeps
the recursion bounded for every coupling including ``g = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ConfigError,
    NoBracketError,
    PoleDenominatorError,
    SeriesNotConvergedError,
)
from .model import ModelParams, TruncationConfig

__all__ = [
    "CoefficientTables",
    "GEvaluation",
    "EPLocation",
    "RealZero",
    "series_plus",
    "series_minus",
    "g_complex",
    "g_real",
    "g_eval",
    "find_zeros_complex",
    "find_zeros_real",
    "locate_ep",
    "aa_ep_coupling",
]

_POLE_CUTOFF = 1e-12
_TAIL_TERMS = 5


@dataclass
class CoefficientTables:
    """Series coefficients, premultiplied by ``g**n`` for stability.

    ``f[0] = 1`` and ``c[0] = 1`` by the recursion seeds.  ``tail`` is the
    estimated relative truncation remainder of the plain coefficient sum.
    """

    e: np.ndarray
    f: np.ndarray
    c: np.ndarray
    d: np.ndarray
    n_used: int
    tail: float


@dataclass
class GEvaluation:
    """One spectral-function evaluation at a trial energy."""

    energy: complex
    g_complex: complex
    g_real: float | None
    dg_de: complex


@dataclass
class EPLocation:
    """A located exceptional point on one control parameter."""

    control: str            # "g" or "epsilon"
    value: float            # control value at coalescence
    energy: float           # real energy at coalescence
    manifold_hint: int      # manifold index of the merging pair
    residual_g: float       # |G| at the solution
    residual_dg: float      # |dG/dE| at the solution


@dataclass
class RealZero:
    """A zero of the real spectral function; multiplicity 2 marks a tangency."""

    energy: float
    multiplicity: int = 1


def _check_imaginary(params: ModelParams):
    if params.bias_kind != "imaginary":
        raise ConfigError("series solvers are defined for the imaginary-bias model only")


def _series_sums(e_vals, params: ModelParams, trunc: TruncationConfig, sign: int):
    """Vectorized sums of one displaced-basis series at energies ``e_vals``.

    ``sign = +1`` gives the (e, f) family: denominators ``n - g^2 + i eps/2 - E``;
    ``sign = -1`` gives the (c, d) family with the opposite bias sign.

    Returns ``(s, sw, n_used, tail, converged)`` where ``s = sum phi_n`` and
    ``sw = sum phi_n / den_n`` with ``phi_n`` the g**n-weighted coefficients.
    """
    delta, eps, g = params.reduced()
    e_vals = np.asarray(e_vals, dtype=complex)
    g2 = g * g
    half_bias = sign * 0.5j * eps

    den = -g2 + half_bias - e_vals  # n = 0
    if np.any(np.abs(den) < _POLE_CUTOFF):
        raise PoleDenominatorError("series denominator within 1e-12 of a pole")
    phi_prev = np.zeros_like(e_vals)
    phi = np.ones_like(e_vals)
    s = phi.copy()
    sw = phi / den
    recent = []
    n_used = 0
    converged = False
    for m in range(trunc.n_series):
        den_m = m - g2 + half_bias - e_vals
        nxt = (0.5 * (m + 3 * g2 - half_bias - e_vals
                      - delta * delta / (4.0 * den_m)) * phi
               - g2 * phi_prev) / (m + 1)
        den_next = (m + 1) - g2 + half_bias - e_vals
        if np.any(np.abs(den_next) < _POLE_CUTOFF):
            raise PoleDenominatorError("series denominator within 1e-12 of a pole")
        phi_prev, phi = phi, nxt
        s = s + phi
        sw = sw + phi / den_next
        n_used = m + 1
        rel = np.max(np.abs(phi) / (np.abs(s) + 1e-300))
        recent.append(rel)
        if len(recent) > _TAIL_TERMS:
            recent.pop(0)
        if len(recent) == _TAIL_TERMS and max(recent) < trunc.series_tol:
            converged = True
            break
    tail = float(sum(recent))
    return s, sw, n_used, tail, converged


def series_plus(energy: complex, params: ModelParams, trunc: TruncationConfig):
    """Weighted coefficient arrays ``(e_n g^n, f_n g^n)`` at one energy."""
    return _series_arrays(energy, params, trunc, sign=+1)


def series_minus(energy: complex, params: ModelParams, trunc: TruncationConfig):
    """Weighted coefficient arrays ``(c_n g^n, d_n g^n)`` at one energy."""
    partner, main = _series_arrays(energy, params, trunc, sign=-1)
    return main, partner


def _series_arrays(energy, params, trunc, sign):
    _check_imaginary(params)
    delta, eps, g = params.reduced()
    energy = complex(energy) / 1.0
    g2 = g * g
    half_bias = sign * 0.5j * eps
    main = [1.0 + 0.0j]   # f (or c), weighted
    phi_prev, phi = 0.0j, 1.0 + 0.0j
    recent = []
    for m in range(trunc.n_series):
        den_m = m - g2 + half_bias - energy
        if abs(den_m) < _POLE_CUTOFF:
            raise PoleDenominatorError("series denominator within 1e-12 of a pole")
        nxt = (0.5 * (m + 3 * g2 - half_bias - energy
                      - delta * delta / (4.0 * den_m)) * phi
               - g2 * phi_prev) / (m + 1)
        phi_prev, phi = phi, nxt
        main.append(phi)
        partial = abs(sum(main))
        recent.append(abs(phi) / (partial + 1e-300))
        if len(recent) > _TAIL_TERMS:
            recent.pop(0)
        if len(recent) == _TAIL_TERMS and max(recent) < trunc.series_tol:
            break
    main = np.array(main)
    ns = np.arange(len(main))
    dens = ns - g2 + half_bias - energy
    partner = 0.5 * delta * main / dens   # e (or d), weighted
    return partner, main


def coefficient_tables(energy: complex, params: ModelParams,
                       trunc: TruncationConfig) -> CoefficientTables:
    """Both coefficient families evaluated at one energy."""
    e, f = series_plus(energy, params, trunc)
    c, d = series_minus(energy, params, trunc)
    n_used = max(len(f), len(c)) - 1
    tail = float(abs(f[-1]) / (abs(f.sum()) + 1e-300)
                 + abs(c[-1]) / (abs(c.sum()) + 1e-300))
    return CoefficientTables(e=e, f=f, c=c, d=d, n_used=n_used, tail=tail)


def g_complex(energy, params: ModelParams, trunc: TruncationConfig):
    """Complex spectral function; its zeros are the exact eigenvalues.

    Accepts a scalar or an array of trial energies (vectorized evaluation).

    Raises
    ------
    SeriesNotConvergedError
        If the series tail tolerance is unmet at the term cap.
    """
    _check_imaginary(params)
    delta = params.reduced()[0]
    scalar = np.isscalar(energy) or np.asarray(energy).ndim == 0
    e_arr = np.atleast_1d(np.asarray(energy, dtype=complex)) / params.omega
    s_p, sw_p, _, _, ok_p = _series_sums(e_arr, params, trunc, sign=+1)
    s_m, sw_m, _, _, ok_m = _series_sums(e_arr, params, trunc, sign=-1)
    if not (ok_p and ok_m):
        raise SeriesNotConvergedError(
            f"series tail tolerance unmet at n_series={trunc.n_series}")
    val = (delta / 2.0) ** 2 * sw_p * sw_m - s_p * s_m
    return complex(val[0]) if scalar else val.reshape(np.shape(energy))


def g_real(energy, params: ModelParams, trunc: TruncationConfig):
    """Real spectral function, defined for real trial energies only.

    Equals ``|sum e_n g^n|^2 - |sum f_n g^n|^2``; real by construction, with
    the same real-axis zero set as :func:`g_complex` in the unbroken region.
    """
    _check_imaginary(params)
    if np.any(np.abs(np.imag(np.atleast_1d(energy))) > 0):
        raise ConfigError("g_real requires real trial energies")
    delta = params.reduced()[0]
    scalar = np.isscalar(energy) or np.asarray(energy).ndim == 0
    e_arr = np.atleast_1d(np.asarray(energy, dtype=complex)) / params.omega
    s_p, sw_p, _, _, ok = _series_sums(e_arr, params, trunc, sign=+1)
    if not ok:
        raise SeriesNotConvergedError(
            f"series tail tolerance unmet at n_series={trunc.n_series}")
    val = np.abs(0.5 * delta * sw_p) ** 2 - np.abs(s_p) ** 2
    return float(val[0]) if scalar else val.reshape(np.shape(energy))


def g_eval(energy: complex, params: ModelParams, trunc: TruncationConfig) -> GEvaluation:
    """Evaluate the spectral function and its numerical energy derivative."""
    h = 1e-6 * (1.0 + abs(energy))
    val = g_complex(energy, params, trunc)
    dg = (g_complex(energy + h, params, trunc)
          - g_complex(energy - h, params, trunc)) / (2 * h)
    greal = None
    if abs(complex(energy).imag) == 0.0:
        greal = g_real(complex(energy).real, params, trunc)
    return GEvaluation(energy=complex(energy), g_complex=val, g_real=greal, dg_de=dg)


def _newton_zero(e0: complex, params, trunc, tol: float, max_iter: int = 60):
    """Complex Newton refinement of one seed; returns None on divergence."""
    e = complex(e0)
    for _ in range(max_iter):
        val = g_complex(e, params, trunc)
        if abs(val) < tol:
            return e
        h = 1e-6 * (1.0 + abs(e))
        dg = (g_complex(e + h, params, trunc) - g_complex(e - h, params, trunc)) / (2 * h)
        if dg == 0 or not np.isfinite(abs(dg)):
            return None
        step = val / dg
        if abs(step) > 1.0:          # zeros are isolated on unit scale
            step *= 1.0 / abs(step)
        e = e - step
        if not np.isfinite(e.real) or not np.isfinite(e.imag):
            return None
    return e if abs(g_complex(e, params, trunc)) < tol else None


def find_zeros_complex(
    region: tuple[float, float, float, float],
    params: ModelParams,
    trunc: TruncationConfig,
    grid_shape: tuple[int, int] = (400, 200),
    tol: float = 1e-9,
):
    """All zeros of the complex spectral function inside a rectangle.

    Parameters
    ----------
    region : (re_min, re_max, im_min, im_max)
        Scan rectangle in the complex energy plane.
    grid_shape : (n_re, n_im)
        Scan resolution; every interior local minimum of ``ln|G|^2``
        seeds Newton refinement.
    tol : float
        Acceptance threshold on ``|G|`` after refinement.

    Returns
    -------
    zeros : list of complex
        Deduplicated refined zeros inside the (slightly padded) rectangle.
    n_diverged : int
        Count of seeds dropped because Newton failed to converge.
    """
    re_min, re_max, im_min, im_max = region
    if not (re_max > re_min and im_max > im_min):
        raise ConfigError("empty scan rectangle")
    n_re, n_im = grid_shape
    res = np.linspace(re_min, re_max, n_re)
    ims = np.linspace(im_min, im_max, n_im)
    ee = res[None, :] + 1j * ims[:, None]
    vals = g_complex(ee.ravel(), params, trunc).reshape(ee.shape)
    ln_g2 = np.log(np.abs(vals) ** 2 + 1e-300)

    # local minima over the 8-neighbourhood, excluding the frame
    interior = ln_g2[1:-1, 1:-1]
    is_min = np.ones_like(interior, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            is_min &= interior <= ln_g2[1 + di:n_im - 1 + di, 1 + dj:n_re - 1 + dj]
    # every interior local minimum of an analytic |G| marks a zero
    # (minimum modulus principle), so all minima seed Newton refinement
    ii, jj = np.nonzero(is_min)
    seeds = ee[ii + 1, jj + 1]

    pad_re = (re_max - re_min) / (n_re - 1)
    pad_im = (im_max - im_min) / (n_im - 1)
    zeros: list[complex] = []
    n_diverged = 0
    for seed in seeds:
        z = _newton_zero(seed, params, trunc, tol)
        if z is None:
            n_diverged += 1
            continue
        if not (re_min - pad_re <= z.real <= re_max + pad_re
                and im_min - pad_im <= z.imag <= im_max + pad_im):
            continue
        if all(abs(z - known) > 1e-8 for known in zeros):
            zeros.append(z)
    zeros.sort(key=lambda z: (z.real, z.imag))
    return zeros, n_diverged


def find_zeros_real(
    interval: tuple[float, float],
    params: ModelParams,
    trunc: TruncationConfig,
    n_grid: int = 2000,
    accept_tol: float = 1e-7,
    tangency_floor: float = 1e-6,
) -> list[RealZero]:
    """Zeros of the real spectral function on a bounded energy interval.

    Sign changes are refined by bisection; local minima of ``|G|`` below
    ``tangency_floor`` without a sign change are refined as double roots
    (tangencies, the signature of an exceptional point).  Sign changes that
    refine onto a pole rather than a zero (possible only at ``epsilon = 0``)
    are rejected by the ``|G|`` acceptance test.
    """
    lo, hi = interval
    if not hi > lo:
        raise ConfigError("empty search interval")
    xs = np.linspace(lo, hi, n_grid)
    vals = np.real(g_real(xs, params, trunc))

    func = lambda x: g_real(float(x), params, trunc)
    zeros: list[RealZero] = []
    crossing = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    crossing_cells = set()
    for k in crossing:
        root = brentq(func, xs[k], xs[k + 1], xtol=1e-13, rtol=8.9e-16)
        if abs(func(root)) < accept_tol:  # rejects poles
            zeros.append(RealZero(energy=float(root), multiplicity=1))
            crossing_cells.add(k)

    # tangency sweep: interior |G| minima below floor, away from crossings
    mag = np.abs(vals)
    for k in range(1, n_grid - 1):
        if mag[k] < tangency_floor and mag[k] <= mag[k - 1] and mag[k] <= mag[k + 1]:
            if any(abs(k - c) <= 1 for c in crossing_cells):
                continue
            x = _refine_tangency(func, xs[k - 1], xs[k + 1])
            if x is not None and all(abs(x - z.energy) > 1e-8 for z in zeros):
                zeros.append(RealZero(energy=float(x), multiplicity=2))
    zeros.sort(key=lambda z: z.energy)
    return zeros


def _refine_tangency(func, lo, hi, iters=80):
    """Golden-section minimisation of |G| for a double-root candidate."""
    invphi = (np.sqrt(5.0) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = abs(func(c)), abs(func(d))
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = abs(func(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = abs(func(d))
        if b - a < 1e-12 * (1 + abs(a)):
            break
    x = 0.5 * (a + b)
    return x if abs(func(x)) < 1e-5 else None


def aa_ep_coupling(delta: float, epsilon: float) -> float:
    """Manifold-diagonal estimate of the ground-pair EP coupling.

    Solves ``epsilon = delta * exp(-2 g^2)``; a good Newton seed for
    :func:`locate_ep` on the m = 0 pair.
    """
    if not 0 < epsilon < delta:
        raise ConfigError("requires 0 < epsilon < delta")
    return float(np.sqrt(np.log(delta / epsilon) / 2.0))


def locate_ep(
    params: ModelParams,
    control: str,
    interval: tuple[float, float],
    manifold: int,
    trunc: TruncationConfig,
    energy_halfwidth: float = 0.35,
    n_scan: int = 41,
    residual_tol: float = 1e-9,
    max_iter: int = 80,
) -> EPLocation:
    """Locate the exceptional point where a real eigenvalue pair merges.

    The control parameter (``"g"`` or ``"epsilon"``) is scanned over
    ``interval`` counting real zeros in an energy window centred on the
    target manifold; the bracket where the pair count drops from 2 to 0
    seeds a two-variable Newton iteration on the simultaneous conditions
    ``G = 0`` and ``dG/dE = 0``, with all derivatives taken by central
    differences at step ``1e-5 * (1 + |x|)``.

    Raises
    ------
    NoBracketError
        If the pair never merges inside the interval.
    """
    _check_imaginary(params)
    if control not in ("g", "epsilon"):
        raise ConfigError("control must be 'g' or 'epsilon'")

    def with_control(c: float) -> ModelParams:
        return params.replace(**{control: float(c)})

    def window(c: float) -> tuple[float, float]:
        p = with_control(c)
        centre = (manifold - (p.g / p.omega) ** 2) * p.omega
        return centre - energy_halfwidth, centre + energy_halfwidth

    scan = np.linspace(interval[0], interval[1], n_scan)
    counts = []
    pair_centres = []
    for c in scan:
        zs = find_zeros_real(window(c), with_control(c), trunc, n_grid=400)
        reals = [z.energy for z in zs for _ in range(z.multiplicity)]
        counts.append(len(reals))
        pair_centres.append(np.mean(reals) if reals else np.nan)

    bracket = None
    for k in range(n_scan - 1):
        if counts[k] >= 2 and counts[k + 1] < 2:
            bracket = k
            break
        if counts[k] < 2 and counts[k + 1] >= 2:
            bracket = k
            break
    if bracket is None:
        raise NoBracketError(
            f"pair for manifold {manifold} does not merge in {control} interval {interval}")

    c0 = 0.5 * (scan[bracket] + scan[bracket + 1])
    e0 = pair_centres[bracket] if counts[bracket] >= 2 else pair_centres[bracket + 1]

    def gr(e: float, c: float) -> float:
        return g_real(e, with_control(c), trunc)

    e, c = float(e0), float(c0)
    for _ in range(max_iter):
        he = 1e-5 * (1.0 + abs(e))
        hc = 1e-5 * (1.0 + abs(c))
        g0 = gr(e, c)
        gp, gm = gr(e + he, c), gr(e - he, c)
        g_e = (gp - gm) / (2 * he)
        g_c = (gr(e, c + hc) - gr(e, c - hc)) / (2 * hc)
        g_ee = (gp - 2 * g0 + gm) / he ** 2
        g_ec = (gr(e + he, c + hc) - gr(e + he, c - hc)
                - gr(e - he, c + hc) + gr(e - he, c - hc)) / (4 * he * hc)
        jac = np.array([[g_e, g_c], [g_ee, g_ec]])
        rhs = np.array([g0, g_e])
        try:
            step = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError:
            raise NoBracketError("singular Newton system in EP refinement")
        step = np.clip(step, -0.1, 0.1)
        e, c = e - step[0], c - step[1]
        if max(abs(step)) < 1e-13 * (1 + abs(e) + abs(c)):
            break

    he = 1e-5 * (1.0 + abs(e))
    res_g = abs(gr(e, c))
    res_dg = abs((gr(e + he, c) - gr(e - he, c)) / (2 * he))
    if not (res_g < residual_tol and res_dg < residual_tol):
        raise NoBracketError(
            f"EP refinement stalled: residuals |G|={res_g:.2e}, |dG/dE|={res_dg:.2e}")
    p = with_control(c)
    hint = int(round(e / p.omega + (p.g / p.omega) ** 2))
    return EPLocation(control=control, value=float(c), energy=float(e),
                      manifold_hint=hint, residual_g=res_g, residual_dg=res_dg)
