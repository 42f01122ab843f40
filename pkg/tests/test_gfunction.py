"""Transcendental-function tests against the diagonalization oracle."""

import numpy as np
import pytest

from ptqrm import (
    ModelParams,
    TruncationConfig,
    aa_ep_coupling,
    build_hamiltonian,
    exact_diagonalize,
    find_zeros_complex,
    find_zeros_real,
    g_complex,
    g_eval,
    g_real,
    locate_ep,
    series_minus,
    series_plus,
)
from ptqrm.errors import NoBracketError

P_REF = ModelParams(delta=0.5, epsilon=0.2, g=0.25)
T_REF = TruncationConfig(n_fock=60)


def ed_energies(params, trunc=T_REF):
    return np.array([q.energy for q in
                     exact_diagonalize(build_hamiltonian(params, trunc))])


def test_conjugation_relations_at_real_energy():
    # at real E the two coefficient families are complex conjugates
    e = 0.3
    ew, fw = series_plus(e, P_REF, T_REF)
    cw, dw = series_minus(e, P_REF, T_REF)
    assert np.max(np.abs(ew - np.conj(dw))) < 1e-12
    assert np.max(np.abs(fw - np.conj(cw))) < 1e-12


def test_g_real_equals_g_complex_on_real_axis():
    es = np.linspace(-0.4, 3.4, 40)
    gc = g_complex(es.astype(complex), P_REF, T_REF)
    gr = np.array([g_real(e, P_REF, T_REF) for e in es])
    assert np.max(np.abs(gc.real - gr)) < 1e-8
    assert np.max(np.abs(gc.imag)) < 1e-8


def test_g_vanishes_at_ed_eigenvalues():
    ev = ed_energies(P_REF)
    window = ev[(ev.real > -0.5) & (ev.real < 4.5)]
    vals = g_complex(window, P_REF, T_REF)
    assert np.max(np.abs(vals)) < 1e-8


def test_g_nonzero_off_spectrum():
    ev = ed_energies(P_REF)
    probe = ev[:6] + 0.1
    vals = g_complex(probe, P_REF, T_REF)
    assert np.min(np.abs(vals)) > 1e-3


def test_hermitian_limit_imag_part():
    p = P_REF.replace(epsilon=0.0)
    es = np.linspace(0.05, 2.95, 30) + 0j      # mid-gap probes
    vals = g_complex(es, p, T_REF)
    assert np.max(np.abs(vals.imag)) < 1e-12


def test_g_eval_derivative_consistency():
    ev = g_eval(0.7 + 0.1j, P_REF, T_REF)
    h = 1e-6
    fd = (g_complex(np.array([0.7 + 0.1j + h]), P_REF, T_REF)[0]
          - g_complex(np.array([0.7 + 0.1j - h]), P_REF, T_REF)[0]) / (2 * h)
    assert abs(ev.dg_de - fd) / max(abs(fd), 1e-30) < 1e-4


def test_find_zeros_real_matches_ed():
    p = P_REF.replace(g=0.1)
    zeros = find_zeros_real((-0.5, 3.5), p, T_REF)
    ev = ed_energies(p)
    real_ev = np.sort(ev.real[(np.abs(ev.imag) < 1e-10)
                              & (ev.real > -0.5) & (ev.real < 3.5)])
    got = np.sort([z.energy for z in zeros])
    assert len(got) == len(real_ev)
    assert np.max(np.abs(got - real_ev)) < 1e-6


def test_find_zeros_real_hermitian():
    p = P_REF.replace(epsilon=0.0)
    zeros = find_zeros_real((-0.5, 3.5), p, T_REF)
    ev = ed_energies(p)
    real_ev = np.sort(ev.real[(ev.real > -0.5) & (ev.real < 3.5)])
    got = np.sort([z.energy for z in zeros])
    assert np.max(np.abs(got - real_ev)) < 1e-8


def test_find_zeros_complex_matches_ed_spectrum():
    zeros, n_diverged = find_zeros_complex((-0.5, 4.5, -0.6, 0.6), P_REF, T_REF)
    ev = ed_energies(P_REF)
    window = ev[(ev.real > -0.5) & (ev.real < 4.5) & (np.abs(ev.imag) < 0.6)]
    assert len(zeros) == len(window)
    for z in zeros:
        assert np.min(np.abs(window - z)) < 1e-6
    # conjugate zeros appear symmetrically in the broken phase
    p_broken = P_REF.replace(g=0.75)
    zb, _ = find_zeros_complex((-0.7, 1.2, -0.4, 0.4), p_broken, T_REF,
                               grid_shape=(150, 80))
    zb = np.array(zb)
    complex_zb = zb[np.abs(zb.imag) > 1e-8]
    for z in complex_zb:
        assert np.min(np.abs(zb - np.conj(z))) < 1e-6


def test_find_zeros_complex_empty_region():
    zeros, _ = find_zeros_complex((-5.0, -2.0, -0.3, 0.3), P_REF, T_REF,
                                  grid_shape=(80, 40))
    assert zeros == []


def test_aa_ep_coupling_seed():
    # closed form sqrt(ln(delta/eps)/2), recomputed in place
    assert abs(aa_ep_coupling(0.5, 0.2) - np.sqrt(np.log(2.5) / 2)) < 1e-14
    assert abs(aa_ep_coupling(0.5, 0.4) - np.sqrt(np.log(1.25) / 2)) < 1e-14


@pytest.mark.parametrize("epsilon, interval, expected", [
    (0.2, (0.4, 0.9), 0.6828),
    (0.4, (0.15, 0.6), 0.3358),
])
def test_locate_ep(epsilon, interval, expected):
    p = ModelParams(delta=0.5, epsilon=epsilon, g=0.25)
    loc = locate_ep(p, "g", interval, 0, T_REF)
    assert abs(loc.value - expected) < 5e-4
    assert abs(loc.residual_g) < 1e-9
    assert abs(loc.residual_dg) < 1e-9


def test_locate_ep_no_bracket():
    p = ModelParams(delta=0.5, epsilon=0.2, g=0.25)
    with pytest.raises(NoBracketError):
        locate_ep(p, "g", (0.05, 0.2), 0, T_REF)    # pair does not merge here
