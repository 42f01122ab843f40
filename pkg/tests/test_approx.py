"""Manifold-approximation tests.

Laguerre values are checked against scipy.special.eval_genlaguerre (an
independent implementation); energies and states are checked against the
exact-diagonalization oracle and closed forms of 2x2 blocks.
"""

import numpy as np
import pytest
from scipy.special import eval_genlaguerre

from ptqrm import (
    ModelParams,
    TruncationConfig,
    aa_pair,
    build_hamiltonian,
    caa_block,
    caa_pair,
    coupling_D,
    displaced_number_states,
    exact_diagonalize,
    laguerre_assoc,
    overlap_D,
    overlap_table,
    state_to_fock,
)
from ptqrm.errors import ConfigError, TruncationTailError

P_REF = ModelParams(delta=0.5, epsilon=0.2, g=0.25)


def test_laguerre_against_scipy():
    rng = np.random.default_rng(7)
    for _ in range(200):
        m = int(rng.integers(0, 20))
        alpha = int(rng.integers(0, 10))
        x = float(rng.uniform(0.0, 10.0))
        ref = eval_genlaguerre(m, alpha, x)
        assert abs(laguerre_assoc(m, alpha, x) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_overlap_symmetry_and_limits():
    table = overlap_table(8, 0.5, 0.3).d
    assert np.allclose(table, table.T, atol=0)
    # D_mm = (delta/2) e^{-2g^2} L_m(4g^2) stays positive while 4g^2 is
    # below the first Laguerre root, i.e. for small enough g
    small_g = overlap_table(8, 0.5, 0.1).d
    assert np.all(np.diag(small_g) > 0)
    # off-diagonal elements vanish as g -> 0
    small = overlap_table(5, 0.5, 1e-8).d
    off = small - np.diag(np.diag(small))
    assert np.max(np.abs(off)) < 1e-7


def test_overlap_d00_closed_form():
    # D_00 = (delta/2) exp(-2 g^2)
    assert abs(overlap_D(0, 0, 0.5, 0.25) - 0.25 * np.exp(-0.125)) < 1e-15


def test_coupling_matches_displaced_state_overlaps():
    # D_mn = (delta/2) (-1)^m <m_-|n_+> computed by brute force; the
    # (-1)^min(m,n) closed form is the equivalent symmetric rewriting
    g, delta, n_fock = 0.3, 0.8, 60
    plus = displaced_number_states(5, g, n_fock, +1)
    minus = displaced_number_states(5, g, n_fock, -1)
    for m in range(4):
        for n in range(4):
            brute = 0.5 * delta * (-1) ** m * float(minus[:, m] @ plus[:, n])
            assert abs(coupling_D(m, n, delta, g) - brute) < 1e-12


def test_signed_coupling_reproduces_exact_spectrum():
    # the full displaced-basis matrix with signed couplings is an exact
    # rewriting of the Hamiltonian; its eigenvalues must match ED
    delta, eps, g = 1.0, 0.3, 0.6
    n = 40
    d = np.array([[coupling_D(i, j, delta, g) for j in range(n + 1)]
                  for i in range(n + 1)])
    idx = np.arange(n + 1)
    full = np.block([
        [np.diag(idx - g * g + 0.5j * eps), -d],
        [-d, np.diag(idx - g * g - 0.5j * eps)],
    ])
    block_ev = np.linalg.eigvals(full)
    p = ModelParams(delta=delta, epsilon=eps, g=g)
    ed = np.array([q.energy for q in
                   exact_diagonalize(build_hamiltonian(p, TruncationConfig(n_fock=80)))])
    low = np.sort_complex(ed[np.argsort(ed.real)][:8])
    for e in low:
        assert np.min(np.abs(block_ev - e)) < 1e-10


@pytest.mark.parametrize("m", range(6))
@pytest.mark.parametrize("g", [0.1, 0.5, 1.0, 1.5])
def test_aa_closed_form_matches_two_by_two_solve(m, g):
    p = ModelParams(delta=1.0, epsilon=0.3, g=g)
    d = coupling_D(m, m, 1.0, g)
    block = np.array([[m - g * g + 0.15j, -d], [-d, m - g * g - 0.15j]])
    ref = np.linalg.eigvals(block)
    got = [s.energy for s in aa_pair(m, p)]
    # compare as a multiset; eig's real parts carry ~1e-16 noise that can
    # flip a (Re, Im) sort of a conjugate pair
    for e in got:
        assert np.min(np.abs(ref - e)) < 1e-13


def test_aa_phase_boundary():
    # unbroken for eps < 2 D_mm, conjugate pair above, degenerate at it
    delta, g = 0.5, 0.25
    d00 = overlap_D(0, 0, delta, g)
    below = aa_pair(0, ModelParams(delta=delta, epsilon=1.9 * d00, g=g))
    assert all(abs(s.energy.imag) < 1e-14 for s in below)
    above = aa_pair(0, ModelParams(delta=delta, epsilon=2.1 * d00, g=g))
    assert all(abs(s.energy.imag) > 1e-6 for s in above)
    assert abs(above[0].energy - np.conj(above[1].energy)) < 1e-14
    at = aa_pair(0, ModelParams(delta=delta, epsilon=2.0 * d00, g=g))
    assert at[0].ep_degenerate and abs(at[0].energy - at[1].energy) < 1e-14


def test_aa_reference_pair_frozen():
    # frozen oracle values for (delta=0.5, eps=0.2, g=0.25), m=0:
    # E = -g^2 -/+ sqrt(delta^2 exp(-4g^2) - eps^2)/2
    plus, minus = aa_pair(0, P_REF)
    assert abs(plus.energy - (-0.2591597288261194)) < 1e-12
    assert abs(minus.energy - 0.1341597288261194) < 1e-12


def test_caa_block_shape_and_m0():
    assert caa_block(2, P_REF).matrix.shape == (6, 6)
    assert caa_block(0, P_REF).matrix.shape == (4, 4)


def test_caa_matches_positional_selection_rule():
    # third & fourth of six roots sorted by real part (first & second of
    # four for m = 0) match the returned pair
    for m in (0, 1, 3):
        for g in (0.2, 0.6):
            p = ModelParams(delta=1.0, epsilon=0.1, g=g)
            roots = np.linalg.eigvals(caa_block(m, p).matrix)
            roots = roots[np.lexsort((roots.imag, np.round(roots.real, 10)))]
            sel = roots[2:4] if m > 0 else roots[0:2]
            got = np.sort_complex([s.energy for s in caa_pair(m, p)])
            assert np.max(np.abs(np.sort_complex(sel) - got)) < 1e-12


def test_caa_converges_to_aa():
    # block-diagonal limit at g = 0 exactly
    p0 = ModelParams(delta=1.0, epsilon=0.1, g=0.0)
    for m in (0, 1, 2):
        aa = aa_pair(m, p0)
        caa = caa_pair(m, p0)
        diff = max(abs(a.energy - c.energy) for a, c in zip(aa, caa))
        assert diff < 1e-10
    # at g = 1e-3 with a small splitting the neighbour-manifold shift,
    # of order (delta*g)^2 / detuning, stays below 1e-8
    p = ModelParams(delta=0.05, epsilon=0.02, g=1e-3)
    aa = aa_pair(0, p)
    caa = caa_pair(0, p)
    diff = max(abs(a.energy - c.energy) for a, c in zip(aa, caa))
    assert diff < 1e-8


def test_caa_improves_on_aa_at_reference_point():
    t = TruncationConfig(n_fock=60)
    pairs = exact_diagonalize(build_hamiltonian(P_REF, t))
    ground = pairs[0]
    aa = aa_pair(0, P_REF)[0]
    caa = caa_pair(0, P_REF)[0]
    v_aa = state_to_fock(aa, P_REF, 60)
    v_caa = state_to_fock(caa, P_REF, 60)
    assert abs(np.vdot(ground.right, v_aa)) > 0.99
    assert abs(np.vdot(ground.right, v_caa)) > abs(np.vdot(ground.right, v_aa))
    assert abs(caa.energy - ground.energy) < abs(aa.energy - ground.energy)


def test_displaced_number_states_orthonormal():
    for sign in (+1, -1):
        cols = displaced_number_states(6, 0.4, 80, sign)
        gram = cols.T @ cols
        assert np.max(np.abs(gram - np.eye(7))) < 1e-12
    # g = 0 reduces to bare Fock states
    cols = displaced_number_states(3, 0.0, 10, +1)
    assert np.allclose(cols, np.eye(11)[:, :4], atol=0)


def test_displaced_vacuum_is_coherent_state():
    g, n_fock = 0.35, 60
    import math
    ks = np.arange(n_fock + 1)
    coherent = np.exp(-g * g / 2) * (-g) ** ks / np.sqrt(
        np.array([math.factorial(int(k)) for k in ks], dtype=float))
    got = displaced_number_states(0, g, n_fock, +1)[:, 0]
    assert np.max(np.abs(got - coherent)) < 1e-12


def test_state_to_fock_unit_norm_and_eigen_residual():
    st = aa_pair(1, P_REF)[0]
    vec = state_to_fock(st, P_REF, 60)
    assert abs(np.linalg.norm(vec) - 1.0) < 1e-10
    # AA state solves its manifold block, so the residual against the full
    # Hamiltonian equals the neglected cross-manifold coupling (small here)
    h = build_hamiltonian(P_REF, TruncationConfig(n_fock=60))
    res = np.linalg.norm(h @ vec - st.energy * vec)
    assert res < 0.3


def test_state_to_fock_truncation_tail():
    st = aa_pair(3, ModelParams(delta=0.5, epsilon=0.1, g=1.2))[0]
    with pytest.raises(TruncationTailError):
        state_to_fock(st, ModelParams(delta=0.5, epsilon=0.1, g=1.2), 6)


def test_invalid_manifold_rejected():
    with pytest.raises(ConfigError):
        aa_pair(-1, P_REF)
    with pytest.raises(ConfigError):
        overlap_D(-1, 0, 0.5, 0.1)
