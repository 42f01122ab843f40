"""Time-evolution and emission-spectrum tests.

Direct adaptive integration serves as the oracle for the spectral
propagator; analytically known signals (pure cosines, two-level Rabi
flopping) calibrate the Fourier machinery.
"""

import numpy as np
import pytest

from ptqrm import (
    ModelParams,
    TruncationConfig,
    build_hamiltonian,
    emission_spectrum,
    evolve,
    evolve_in_basis,
    exact_diagonalize,
    find_peaks,
    initial_upper_vacuum,
    qubit_population,
    sigma_z_series,
)
from ptqrm.dynamics import ConditioningFallbackWarning
from ptqrm.errors import ConfigError


def test_two_level_rabi_flopping():
    # H = -(delta/2) sx on the qubit alone (n_fock = 0, g = 0):
    # <sigma_z(t)> = cos(delta t) exactly
    p = ModelParams(delta=0.7, epsilon=0.0, g=0.0)
    h = build_hamiltonian(p, TruncationConfig(n_fock=0))
    psi0 = initial_upper_vacuum(0)
    times = np.linspace(0.0, 30.0, 400)
    tr = evolve(h, psi0, times)
    assert np.max(np.abs(tr.sigma_z - np.cos(0.7 * times))) < 1e-10
    assert np.max(np.abs(tr.norm - 1.0)) < 1e-10


def test_spectral_matches_direct_oracle():
    p = ModelParams(delta=1.0, epsilon=0.1, g=0.2)
    t = TruncationConfig(n_fock=30)
    h = build_hamiltonian(p, t)
    psi0 = initial_upper_vacuum(30)
    times = np.linspace(0.0, 100.0, 501)
    tr_s = evolve(h, psi0, times, method="spectral")
    tr_d = evolve(h, psi0, times, method="direct")
    assert np.max(np.abs(tr_s.sigma_z - tr_d.sigma_z)) < 1e-6
    assert np.max(np.abs(tr_s.log_norm - tr_d.log_norm)) < 1e-6


def test_broken_phase_norm_growth():
    # deep in the broken phase the norm grows; log_norm must stay finite
    p = ModelParams(delta=0.5, epsilon=0.4, g=0.8)
    t = TruncationConfig(n_fock=30)
    tr = evolve(build_hamiltonian(p, t), initial_upper_vacuum(30),
                np.linspace(0.0, 200.0, 401))
    assert np.all(np.isfinite(tr.log_norm))
    assert tr.log_norm[-1] > tr.log_norm[0]
    assert np.all(np.abs(tr.sigma_z) <= 1.0 + 1e-9)


def test_sigma_z_rescaling_invariance():
    rng = np.random.default_rng(3)
    states = rng.normal(size=(8, 5)) + 1j * rng.normal(size=(8, 5))
    base = sigma_z_series(states, 3)
    scaled = sigma_z_series(states * 7.3e12, 3)
    assert np.max(np.abs(base - scaled)) < 1e-12
    assert np.max(np.abs(qubit_population(base) - (1 + base) / 2)) == 0


def test_evolve_in_basis_exact_for_true_eigensystem():
    p = ModelParams(delta=1.0, epsilon=0.1, g=0.2)
    t = TruncationConfig(n_fock=20)
    h = build_hamiltonian(p, t)
    pairs = exact_diagonalize(h)
    energies = np.array([q.energy for q in pairs])
    vectors = np.column_stack([q.right for q in pairs])
    psi0 = initial_upper_vacuum(20)
    times = np.linspace(0.0, 50.0, 201)
    ref = evolve(h, psi0, times)
    got = evolve_in_basis(energies, vectors, psi0, times, 20)
    assert np.max(np.abs(ref.sigma_z - got.sigma_z)) < 1e-8


def test_defective_fallback_warning():
    h = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)   # Jordan block
    with pytest.warns(ConditioningFallbackWarning):
        tr = evolve(h, np.array([1.0, 0.0]), np.linspace(0.0, 1.0, 5))
    assert tr.method == "direct"


def test_emission_pure_cosine_calibration():
    # DFT identity: a unit cosine at f0 gives a peak at f0 with height
    # ~ T/4 x mean(window) x zero-pad-independent position
    f0, dt, n = 0.173, 0.1, 4000
    tt = np.arange(n) * dt
    spec = emission_spectrum(np.cos(2 * np.pi * f0 * tt), dt)
    peaks = find_peaks(spec)
    assert len(peaks) == 1
    assert abs(peaks[0].position - f0) < spec.bin_width / 10
    # hann-windowed FWHM is twice the native bin width
    assert abs(peaks[0].fwhm - 2.0 * spec.bin_width) < 0.2 * spec.bin_width


def test_emission_two_tones_resolved():
    dt, n = 0.05, 8000
    tt = np.arange(n) * dt
    sig = np.cos(2 * np.pi * 0.11 * tt) + 0.5 * np.cos(2 * np.pi * 0.23 * tt)
    peaks = find_peaks(emission_spectrum(sig, dt))
    assert len(peaks) == 2
    assert abs(peaks[0].position - 0.11) < 1e-3
    assert abs(peaks[1].position - 0.23) < 1e-3
    assert peaks[0].height > peaks[1].height


def test_emission_detrend_removes_dc():
    dt = 0.1
    sig = 5.0 + np.cos(2 * np.pi * 0.2 * np.arange(2000) * dt)
    spec = emission_spectrum(sig, dt)
    # mean subtraction kills the 5.0 offset; only cosine leakage remains
    assert spec.magnitude[0] < 1e-5 * spec.magnitude.max()


def test_emission_validation():
    with pytest.raises(ConfigError):
        emission_spectrum(np.ones(10), -0.1)
    with pytest.raises(ConfigError):
        emission_spectrum(np.ones(10), 0.1, zero_pad=0)
    with pytest.raises(ConfigError):
        emission_spectrum(np.ones(10), 0.1, window="boxcar-ish")


def test_vrs_single_peak_matches_aa_gap():
    # with the manifold-diagonal eigensystem the emission line sits at the
    # m = 0 pair splitting over 2 pi
    from ptqrm import aa_pair, state_to_fock
    p = ModelParams(delta=1.0, epsilon=0.1, g=0.2)
    n_fock = 40
    energies, vectors = [], []
    for m in range(10):
        for st in aa_pair(m, p):
            energies.append(st.energy)
            vectors.append(state_to_fock(st, p, n_fock))
    times = np.arange(0.0, 200.0, 0.05)
    tr = evolve_in_basis(np.array(energies), np.column_stack(vectors),
                         initial_upper_vacuum(n_fock), times, n_fock)
    spec = emission_spectrum(tr.sigma_z, 0.05)
    peaks = find_peaks(spec, noise_floor=0.1 * spec.magnitude.max())
    e_plus, e_minus = (s.energy for s in aa_pair(0, p))
    expected = abs((e_minus - e_plus).real) / (2 * np.pi)
    assert len(peaks) == 1
    assert abs(peaks[0].position - expected) < spec.bin_width
