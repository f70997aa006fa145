import numpy as np
import pytest
import scipy.constants as const
from hypothesis import given, settings, strategies as st

from fmforge.modes import (
    DEFAULT_TRANSVERSE_FREQ, RAMAN_355_WAVEVECTOR, YB171_MASS, ModeError, ModeStructure,
    TrapConfig, _coulomb_force, custom_modes, equilibrium_positions, lamb_dicke_matrix,
    transverse_matrix, transverse_modes,
)
from oracles import coulomb_energy_positions

TWO_PI = 2 * np.pi


def test_two_ion_positions_analytic():
    u = equilibrium_positions(TrapConfig(2))
    assert np.allclose(u, [-(0.25 ** (1 / 3)), 0.25 ** (1 / 3)], atol=1e-12)


def test_three_ion_middle_at_origin():
    assert equilibrium_positions(3)[1] == 0.0


def test_four_ion_ratio_matches_energy_minimisation():
    u = equilibrium_positions(4)
    ref = coulomb_energy_positions(4)
    assert abs(u[3] / u[2] - ref[3] / ref[2]) < 1e-8


@pytest.mark.parametrize("n", [2, 3, 5, 8, 12, 20])
def test_positions_sorted_symmetric_balanced(n):
    u = equilibrium_positions(n)
    assert np.all(np.diff(u) > 0)
    assert np.allclose(u, -u[::-1], atol=1e-10)
    assert np.max(np.abs(_coulomb_force(u))) < 1e-12


def test_two_ion_modes_analytic():
    trap = TrapConfig(2)
    m = transverse_modes(trap)
    wt, wz = trap.transverse_freq, trap.axial_freq
    assert m.mode_freqs[0] == wt
    assert np.isclose(m.mode_freqs[1], np.sqrt(wt**2 - wz**2), rtol=1e-13)
    s = 1 / np.sqrt(2)
    assert np.allclose(m.mode_vectors, [[s, s], [s, -s]], atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 7, 10, 12])
def test_mode_invariants(n):
    trap = TrapConfig(n)
    m = transverse_modes(trap)
    b = m.mode_vectors
    assert np.allclose(b @ b.T, np.eye(n), atol=1e-10)
    assert np.all(m.mode_freqs > 0)
    assert np.all(np.diff(m.mode_freqs) < 0)
    assert m.mode_freqs[0] == trap.transverse_freq
    assert np.allclose(b[0], 1 / np.sqrt(n), atol=1e-10)
    a = transverse_matrix(trap, m.positions)
    lam = (m.mode_freqs / trap.axial_freq) ** 2
    assert np.max(np.abs(a @ b.T - b.T * lam)) < 1e-10
    for row in b:
        first = row[np.flatnonzero(np.abs(row) > 1e-9)[0]]
        assert first > 0


def test_four_ion_matches_dense_eigensolver():
    trap = TrapConfig(4)
    m = transverse_modes(trap)
    ev = np.linalg.eigvalsh(transverse_matrix(trap))
    ref = np.sort(trap.axial_freq * np.sqrt(ev))[::-1]
    assert np.allclose(m.mode_freqs, ref, rtol=1e-12)
    assert len(np.unique(np.round(m.mode_freqs))) == 4


def test_zigzag_rejected():
    # weak transverse confinement relative to axial: past the linear-chain limit
    with pytest.raises(ModeError, match="zig-zag"):
        transverse_modes(TrapConfig(10, axial_freq=TWO_PI * 1.0e6, transverse_freq=TWO_PI * 1.5e6))


@pytest.mark.parametrize("kw", [dict(n_ions=1), dict(n_ions=3, axial_freq=TWO_PI * 3e6),
                                dict(n_ions=2, ion_mass=-1.0), dict(n_ions=2, laser_wavevector=0.0),
                                dict(n_ions=2.5)])
def test_trap_validation(kw):
    with pytest.raises(ModeError):
        TrapConfig(**kw)


def test_lamb_dicke_constant():
    # independent evaluation from CODATA constants
    mass = 170.936 * const.atomic_mass
    dk = np.sqrt(2) * 2 * np.pi / 355e-9
    eta0 = dk * np.sqrt(const.hbar / (2 * mass * 2 * np.pi * 2.1e6))
    for n in (2, 4, 9):
        m = transverse_modes(TrapConfig(n))
        assert np.allclose(m.lamb_dicke[0], eta0 / np.sqrt(n), rtol=1e-12)
    assert 0.09 < eta0 < 0.1


def test_lamb_dicke_scaling():
    trap = TrapConfig(3)
    m = transverse_modes(trap)
    doubled = ModeStructure(2 * m.mode_freqs, m.mode_vectors, m.lamb_dicke)
    assert np.allclose(lamb_dicke_matrix(doubled, trap), m.lamb_dicke / np.sqrt(2), rtol=1e-14)
    assert np.allclose(m.lamb_dicke[0], m.lamb_dicke[0, 0])


def test_deterministic_signs():
    a = transverse_modes(TrapConfig(6))
    b = transverse_modes(TrapConfig(6))
    assert np.array_equal(a.lamb_dicke, b.lamb_dicke)


def test_custom_modes_shapes():
    m = custom_modes([1.0, 2.0], [[0.1, 0.1], [0.1, -0.1]])
    assert m.n_modes == 2 and m.n_ions == 2
    with pytest.raises(ModeError):
        custom_modes([1.0], [[0.1, 0.1], [0.1, -0.1]])


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 14), st.floats(0.25, 0.45))
def test_modes_property(n, wz_mhz):
    trap = TrapConfig(n, axial_freq=TWO_PI * wz_mhz * 1e6 * min(1.0, np.sqrt(6 / n)))
    m = transverse_modes(trap)
    assert np.allclose(m.mode_vectors @ m.mode_vectors.T, np.eye(n), atol=1e-10)
    assert m.mode_freqs[0] == trap.transverse_freq
    assert np.all(m.mode_freqs[1:] < trap.transverse_freq)
