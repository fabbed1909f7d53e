import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from sgilab.constants import G_GRAVITY, HBAR, M_RB87, MU_B
from sgilab.magnetics import CalibratedAcceleration, ThinWire, UniformGradient
from sgilab.wavepacket import (
    CondensateParams,
    GaussianState,
    Potential,
    _advance_quadratic,
    _pack,
    _rk4,
    _unpack,
    advance,
    coherence_scales,
    expand_released,
    propagate,
    released_state,
    tf_to_gaussian,
    thomas_fermi,
)

TWO_PI = 2 * math.pi


def split_step(psi, x, U, mass, T, n_steps):
    """Strang split-step Fourier solution of i hbar psi_t = -hbar^2/2m psi_xx + U(x) psi."""
    k = 2 * np.pi * np.fft.fftfreq(len(x), x[1] - x[0])
    h = T / n_steps
    half_v = np.exp(-0.5j * U * h / HBAR)
    kin = np.exp(-0.5j * HBAR * k * k * h / mass)
    for _ in range(n_steps):
        psi = half_v * psi
        psi = np.fft.ifft(kin * np.fft.fft(psi))
        psi = half_v * psi
    return psi


@pytest.mark.parametrize(
    "model, moment, T",
    [
        (None, 0.5, 0.4e-3),
        (UniformGradient(0.02, 0.0), 1.0, 0.4e-3),
        (UniformGradient(0.01, -2000.0), 1.0, 1e-3),  # U = -mu B: negative curvature traps
        (UniformGradient(0.0, 2000.0), 1.0, 1e-3),
        (UniformGradient(0.0, -20000.0), 1.0, 10e-3),  # several half oscillations: Gouy winding
    ],
)
def test_gaussian_matches_schrodinger_oracle(model, moment, T):
    init = GaussianState.minimum_uncertainty(0.8e-6, z=0.5e-6, p=HBAR * 2e6, chirp=1e10, global_phase=0.2)
    x = np.linspace(-40e-6, 40e-6, 4096, endpoint=False)
    pot = Potential(model, [moment], 1.0, M_RB87, gravity=True)
    U = np.array(pot(x)[0]).reshape(-1)
    psi = split_step(init.wavefunction(x), x, U, M_RB87, T, 10000)
    final = propagate(init, model, (moment, 1.0), T)
    ref = final.wavefunction(x)
    err = np.max(np.abs(psi - ref)) / np.max(np.abs(ref))
    assert err < 2e-4


def test_free_flight_moments():
    s = GaussianState(1e-6, 3 * HBAR / 1e-6, (1e-6) ** 2, (HBAR / 1e-6) ** 2, 0.2 * HBAR)
    t = 2e-3
    f = propagate(s, None, 1, t, gravity=True)
    m = M_RB87
    assert f.z == pytest.approx(s.z + s.p / m * t - 0.5 * G_GRAVITY * t * t, rel=1e-13)
    assert f.p == pytest.approx(s.p - m * G_GRAVITY * t, rel=1e-13)
    assert f.var_z == pytest.approx(s.var_z + 2 * s.cov_zp * t / m + s.var_p * t * t / m**2, rel=1e-13)
    assert f.var_p == pytest.approx(s.var_p, rel=1e-13)


def test_closed_form_agrees_with_rk4():
    y = _pack([GaussianState.minimum_uncertainty(1e-6, p=HBAR * 1e6, chirp=-3e10), GaussianState(2e-6, 0.0, 4e-12, (HBAR / 1e-6) ** 2, 0.0)])
    for model in (UniformGradient(0.3, 500.0), UniformGradient(0.3, -500.0), CalibratedAcceleration(635.0)):
        pot = Potential(model, [0.5, 1.0], [1.0, -1.0], M_RB87, True)
        exact = _advance_quadratic(y, pot, 2e-3)
        rk = _rk4(y, pot, 2e-3, 4000)
        assert np.allclose(rk[:5], exact[:5], rtol=1e-10, atol=0)
        assert np.allclose(rk[5], exact[5], rtol=1e-12, atol=1e-9)


def test_nonlinear_centroid_matches_solve_ivp():
    wire = ThinWire(-0.9, 0.0)
    init = GaussianState.minimum_uncertainty(0.3e-6, z=-95e-6)
    T = 40e-6
    fin = propagate(init, wire, 2, T)
    m = M_RB87

    def rhs(t, y):
        _, dB, _ = wire.field(y[0])
        return [y[1] / m, 1.0 * MU_B * dB - m * G_GRAVITY]

    sol = solve_ivp(rhs, (0, T), [init.z, init.p], method="DOP853", rtol=1e-13, atol=[1e-20, 1e-40])
    assert fin.z == pytest.approx(sol.y[0, -1], rel=1e-11)
    assert fin.p == pytest.approx(sol.y[1, -1], rel=1e-9)


def test_nonlinear_rk4_converges_under_step_doubling():
    wire = ThinWire(-0.9, 0.0)
    pot = Potential(wire, [0.5, 1.0], 1.0, M_RB87, True)
    y = _pack([GaussianState.minimum_uncertainty(0.3e-6, z=-95e-6)] * 2)
    fine = advance(y, pot, 50e-6)
    coarse = _rk4(y, pot, 50e-6, 64)
    assert np.allclose(coarse[:2], fine[:2], rtol=1e-9, atol=0)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.2e-6, 5e-6),
    st.floats(-1e11, 1e11),
    st.floats(-2000.0, 2000.0),
    st.floats(1e-6, 5e-3),
)
def test_uncertainty_product_conserved(sigma, chirp, curvature, t):
    s = GaussianState.minimum_uncertainty(sigma, chirp=chirp)
    f = propagate(s, UniformGradient(0.1, curvature), 2, t)
    assert f.uncertainty_product == pytest.approx(s.uncertainty_product, rel=1e-6)


def test_state_rejects_uncertainty_violation():
    with pytest.raises(ValueError):
        GaussianState(0.0, 0.0, 1e-12, (0.4 * HBAR / 1e-6) ** 2)
    with pytest.raises(ValueError):
        GaussianState(0.0, 0.0, -1.0, 1.0)


def test_mixed_state_core_is_pure():
    s = GaussianState(0.0, 0.0, 1e-12, (3 * HBAR / 1e-6) ** 2)
    assert s.purity == pytest.approx(1 / 6)
    assert not s.is_pure
    assert s.core().is_pure


def test_wavefunction_is_normalized():
    s = GaussianState.minimum_uncertainty(1e-6, chirp=5e10)
    z = np.linspace(-10e-6, 10e-6, 20001)
    assert np.trapezoid(np.abs(s.wavefunction(z)) ** 2, z) == pytest.approx(1.0, rel=1e-10)


def test_chirp_round_trip():
    s = GaussianState.minimum_uncertainty(1e-6, chirp=2.5e10)
    assert s.chirp == pytest.approx(2.5e10)


def test_thomas_fermi_numbers():
    # frozen from mu = (15 hbar^2 sqrt(m) N omega_bar^3 a_s / 2^(5/2))^(2/5)
    p = CondensateParams(1e4, TWO_PI * 40, TWO_PI * 40, TWO_PI * 126)
    mu, w0 = thomas_fermi(p)
    assert w0 == pytest.approx(2.3166e-6, rel=1e-4)
    assert mu / HBAR == pytest.approx(0.5 * M_RB87 * (p.omega_z * w0) ** 2 / HBAR, rel=1e-12)
    assert tf_to_gaussian(w0) == pytest.approx(0.41 * w0)


def test_thomas_fermi_scaling():
    p1 = CondensateParams(1e4, TWO_PI * 40, TWO_PI * 40, TWO_PI * 126)
    p2 = CondensateParams(32e4, TWO_PI * 40, TWO_PI * 40, TWO_PI * 126)
    assert thomas_fermi(p2)[1] / thomas_fermi(p1)[1] == pytest.approx(2.0, rel=1e-12)  # w0 ~ N^(1/5)


def test_released_state_expands_like_closed_form():
    p = CondensateParams(1e4, TWO_PI * 40, TWO_PI * 40, TWO_PI * 126)
    s0 = released_state(p)
    s1 = propagate(s0, None, 1, 1e-3, gravity=False)
    assert s1.sigma_z == pytest.approx(expand_released(s0.sigma_z, p.omega_z, 1e-3), rel=1e-12)


def test_coherence_scales_duality():
    s = GaussianState.minimum_uncertainty(6.1e-6)
    sc = coherence_scales(s)
    assert sc.l_p / M_RB87 == pytest.approx(HBAR / (6.1e-6 * M_RB87))
    assert sc.l_z == pytest.approx(2 * 6.1e-6)
    assert coherence_scales(GaussianState.minimum_uncertainty(12.2e-6)).l_p == pytest.approx(sc.l_p / 2)


def test_propagate_rejects_negative_time():
    with pytest.raises(ValueError):
        propagate(GaussianState.minimum_uncertainty(1e-6), None, 1, -1.0)


def test_unpack_round_trip():
    states = [GaussianState.minimum_uncertainty(1e-6, z=1e-6), GaussianState(0.0, 1e-28, 4e-12, 1e-56, 0.0, 0.3)]
    assert _unpack(_pack(states)) == states
