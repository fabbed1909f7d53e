import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgilab.constants import GI_RB87, GJ_RB87, H, HFS_RB87, I_RB87, M_RB87, MU_B, photon_recoil_velocity
from sgilab.spinsys import (
    RfEvent,
    SpinState,
    breit_rabi_energy,
    ramsey_population,
    rf_rotate,
    rotation_matrix,
    transition_frequency,
)

angles = st.floats(0.0, 2 * np.pi)


def _hyperfine_levels(B):
    """Eigenvalues of A I.J + muB B (gJ Jz + gI Iz) for J = 1/2, I = 3/2, keyed by (F, mF)."""
    def spin_ops(j):
        m = np.arange(j, -j - 1, -1)
        jp = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), 1)
        return 0.5 * (jp + jp.T), -0.5j * (jp - jp.T), np.diag(m)

    Jx, Jy, Jz = spin_ops(0.5)
    Ix, Iy, Iz = spin_ops(I_RB87)
    A = H * HFS_RB87 / (I_RB87 + 0.5)
    idJ, idI = np.eye(2), np.eye(4)
    IJ = sum(np.kron(j, i) for j, i in ((Jx, Ix), (Jy, Iy), (Jz, Iz)))
    Ham = A * IJ + MU_B * B * (GJ_RB87 * np.kron(Jz, idI) + GI_RB87 * np.kron(idJ, Iz))
    mF_op = np.kron(Jz, idI) + np.kron(idJ, Iz)
    levels = {}
    # Ham commutes with mF, so diagonalize block by block
    mF_vals = np.real(np.diag(mF_op))
    for mF in np.unique(mF_vals):
        idx = np.where(np.isclose(mF_vals, mF))[0]
        e = np.linalg.eigvalsh(Ham[np.ix_(idx, idx)].real)
        if len(e) == 1:
            levels[(2, int(round(mF)))] = e[0]
        else:
            levels[(1, int(round(mF)))], levels[(2, int(round(mF)))] = e[0], e[1]
    return levels


@pytest.mark.parametrize("B", [1e-6, 1e-4, 36.7e-4, 0.05, 0.5])
def test_breit_rabi_matches_matrix_diagonalization(B):
    levels = _hyperfine_levels(B)
    for (F, mF), e in levels.items():
        assert breit_rabi_energy(B, F, mF) == pytest.approx(e, rel=0, abs=1e-12 * H * HFS_RB87)


def test_zero_field_splitting_is_hyperfine_frequency():
    assert transition_frequency(0.0, (1, 0), (2, 0)) == pytest.approx(HFS_RB87, rel=1e-12)


def test_low_field_limit_is_linear_zeeman():
    B = 1e-8
    f = (breit_rabi_energy(B, 2, 2) - breit_rabi_energy(B, 2, 1)) / (MU_B * B)
    assert f == pytest.approx(0.5, rel=2e-3)


def test_quadratic_zeeman_splitting_at_bias_field():
    # frozen from the matrix oracle: E21/h = 25.386 MHz, |E21 - E10|/h = 189.3 kHz at 36.7 G
    B = 36.7e-4
    e = [breit_rabi_energy(B, 2, m) for m in (2, 1, 0)]
    assert (e[0] - e[1]) / H == pytest.approx(25.3864e6, rel=1e-5)
    assert abs((e[0] - e[1]) - (e[1] - e[2])) / H == pytest.approx(189.32e3, rel=1e-4)


def test_breit_rabi_rejects_bad_quantum_numbers():
    with pytest.raises(ValueError):
        breit_rabi_energy(1e-4, 3, 0)
    with pytest.raises(ValueError):
        breit_rabi_energy(1e-4, 1, 2)
    with pytest.raises(ValueError):
        breit_rabi_energy(-1e-4, 2, 0)


@given(angles, angles)
def test_rotation_is_unitary(theta, phi):
    R = rotation_matrix(theta, phi)
    assert np.allclose(R.conj().T @ R, np.eye(2), atol=1e-14)
    assert abs(np.linalg.det(R) - 1.0) < 1e-14


def test_pi_half_pulse_makes_equal_superposition():
    s = rf_rotate(SpinState.ket2(), np.pi / 2, 0.0)
    assert s.populations == pytest.approx((0.5, 0.5), abs=1e-15)


def test_pi_pulse_swaps_states():
    s = rf_rotate(SpinState.ket1(), np.pi, 0.3)
    assert s.populations == pytest.approx((0.0, 1.0), abs=1e-15)


@given(st.floats(0.0, 1.0), st.floats(-10, 10), st.floats(-10, 10))
def test_ramsey_population_bounded(c, phase, readout):
    p = ramsey_population(phase, c, readout)
    assert 0.5 - 0.5 * c - 1e-15 <= p <= 0.5 + 0.5 * c + 1e-15


def test_ramsey_population_rejects_contrast_above_one():
    with pytest.raises(ValueError):
        ramsey_population(0.0, 1.2, 0.0)


def test_spin_state_normalization_enforced():
    with pytest.raises(ValueError):
        SpinState(1.0, 1.0)


def test_rf_event_validation():
    assert RfEvent(0.0, np.pi).is_pi
    with pytest.raises(ValueError):
        RfEvent(0.0, 0.0)
    with pytest.raises(ValueError):
        RfEvent(0.0, np.pi, duration=-1.0)


def test_photon_recoil_velocity():
    # h / (m lambda) for the D2 line: 5.8845 mm/s
    assert photon_recoil_velocity() == pytest.approx(5.8845e-3, rel=1e-4)
    assert M_RB87 == pytest.approx(1.443160648e-25, rel=1e-8)
