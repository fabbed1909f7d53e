import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgilab.constants import HBAR, M_RB87
from sgilab.errors import ConfigError
from sgilab.interferometer import (
    Jitter,
    Scheme,
    build_timeline,
    delay_scan,
    fringe_scan,
    gaussian_overlap,
    hd_contrast,
    jitter_monte_carlo,
    linear_phase_spread,
    max_separation,
    phenomenological_contrast,
    relative_phase,
    run,
    run_batch,
)
from sgilab.magnetics import CalibratedAcceleration, ThinWire, UniformGradient, gradient_for_acceleration
from sgilab.spinsys import ramsey_population
from sgilab.wavepacket import CoherenceScales, CondensateParams, GaussianState, released_state

US = 1e-6
SYM = {"T1": 6 * US, "T2": 6 * US, "T3": 6 * US, "T4": 6 * US, "Td1": 300 * US, "Td2": 300 * US}


def test_scheme_pulse_tables():
    f = CalibratedAcceleration(600.0)
    a = build_timeline("CurrentInversionA", SYM, f)
    assert a.gradient_sign_per_pulse == (1, -1, -1, 1)
    assert [e.time for e in a.rf_events] == pytest.approx([0.0, a.total_time])
    b = build_timeline("CurrentInversionB", SYM, f)
    assert [e.time for e in b.rf_events] == pytest.approx([0.0, 0.0, b.total_time])
    s = build_timeline("SpinInversion", SYM, f)
    assert s.gradient_sign_per_pulse == (1, 1, 1, 1)
    assert [e.time for e in s.rf_events] == pytest.approx([0.0, 306 * US, 318 * US])
    assert all(e.is_pi for e in s.rf_events[1:])


def test_half_loop_and_single_kick_force_zero_segments():
    f = CalibratedAcceleration(600.0)
    h = build_timeline("HalfLoop", SYM, f)
    assert (h.T3, h.T4, h.Td2) == (0.0, 0.0, 0.0)
    k = build_timeline("SingleKick", SYM, f)
    assert (k.T2, k.T3, k.T4, k.Td2) == (0.0, 0.0, 0.0, 0.0)
    assert not Scheme.HALF_LOOP.is_full_loop and Scheme.SPIN_INVERSION.is_full_loop


def test_timeline_validation():
    f = CalibratedAcceleration(600.0)
    with pytest.raises(ConfigError):
        build_timeline("CurrentInversionA", {"T1": -1e-6}, f)
    with pytest.raises(ConfigError):
        build_timeline("CurrentInversionA", {"T5": 1e-6}, f)
    with pytest.raises(ConfigError):
        build_timeline("CurrentInversionA", SYM, f, spin_coherence_time=0.0)
    with pytest.raises(ValueError):
        build_timeline("Nope", SYM, f)
    t = build_timeline("CurrentInversionA", (1e-6, 2e-6, 3e-6, 4e-6, 5e-6, 6e-6), f)
    assert t.total_time == pytest.approx(21e-6)
    assert t.with_durations(Td1=0.0).total_time == pytest.approx(16e-6)


@pytest.mark.parametrize("scheme", ["CurrentInversionA", "CurrentInversionB", "SpinInversion"])
def test_symmetric_full_loops_close(scheme):
    for field in (CalibratedAcceleration(635.0), UniformGradient(gradient_for_acceleration(635.0, M_RB87))):
        rec = run(build_timeline(scheme, SYM, field), GaussianState.minimum_uncertainty(1e-6))
        assert abs(rec.delta_z[-1]) < 1e-15
        assert abs(rec.delta_p[-1]) < 1e-28
        assert rec.final_contrast > 1 - 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(10.0, 2000.0), st.floats(1e-6, 20e-6), st.floats(0.0, 1e-3))
def test_closure_is_generic(a, T1, Td):
    d = {"T1": T1, "T2": T1, "T3": T1, "T4": T1, "Td1": Td, "Td2": Td}
    rec = run(build_timeline("CurrentInversionA", d, CalibratedAcceleration(a)), GaussianState.minimum_uncertainty(1e-6))
    dz_max, _ = max_separation(rec)
    assert abs(rec.delta_z[-1]) < 1e-12 * dz_max + 1e-18
    assert rec.final_contrast > 1 - 1e-9


def test_half_loop_splitting_kinematics():
    a, T1, Td = 481.0, 5.4 * US, 200 * US
    rec = run(build_timeline("HalfLoop", {"T1": T1, "T2": T1, "Td1": Td}, CalibratedAcceleration(a)), GaussianState.minimum_uncertainty(0.25e-6))
    assert rec.delta_z[-1] == pytest.approx(a * T1 * T1 + a * T1 * Td, rel=1e-12)
    assert abs(rec.delta_p[-1]) < 1e-12 * M_RB87 * a * T1
    lz = 0.5e-6
    assert rec.final_contrast == pytest.approx(math.exp(-0.5 * (rec.delta_z[-1] / lz) ** 2), rel=1e-10)


def test_single_kick_contrast_is_momentum_gaussian():
    a, sigma = 481.0, 6.1e-6
    init = GaussianState.minimum_uncertainty(sigma)
    lp = HBAR / sigma
    dv = 0.1e-3
    rec = run(build_timeline("SingleKick", {"T1": dv / a}, CalibratedAcceleration(a)), init)
    dz, dp = rec.delta_z[-1], rec.delta_p[-1]
    assert dp == pytest.approx(M_RB87 * dv, rel=1e-12)
    expected = phenomenological_contrast(dz, dp, CoherenceScales(2 * sigma, lp))
    assert rec.final_contrast == pytest.approx(float(expected), rel=1e-10)


def test_field_free_readout_phase_conventions():
    # by hand: R(pi/2, 0)|2> then R(pi/2, phi) gives P1 = (1 + cos phi)/2, i.e. Phi = pi/2;
    # a pi echo swaps the branches and flips Phi to -pi/2
    init = GaussianState.minimum_uncertainty(1e-6)
    h = run(build_timeline("HalfLoop", SYM, None, gravity=False), init)
    assert h.final_contrast == pytest.approx(1.0)
    assert h.final_phase == pytest.approx(np.pi / 2)
    f = run(build_timeline("CurrentInversionA", SYM, None, gravity=False), init)
    assert f.final_phase == pytest.approx(-np.pi / 2)
    assert f.final_labels == (2, 1)


def test_relative_phase_polynomial_matches_numeric():
    field = CalibratedAcceleration(635.0)
    init = GaussianState.minimum_uncertainty(0.5e-6, z=3e-6, p=2e-29)
    base = build_timeline("CurrentInversionA", {**SYM, "T3": 5 * US, "T4": 7 * US}, field)
    poly = relative_phase(run(base, init))
    assert poly.delay == "both"
    for td in (0.0, 100 * US, 400 * US):
        rec = run(base.with_durations(Td1=td, Td2=td), init)
        assert np.angle(np.exp(1j * (poly(td) - rec.rel_phase[-1]))) == pytest.approx(0.0, abs=1e-8)


def test_relative_phase_rejects_nonlinear_field():
    rec = run(build_timeline("CurrentInversionA", SYM, ThinWire(-0.9, 0.0)), GaussianState.minimum_uncertainty(0.3e-6, z=-95e-6))
    with pytest.raises(ConfigError):
        relative_phase(rec)


def test_run_batch_agrees_with_run():
    field = CalibratedAcceleration(481.0)
    init = GaussianState.minimum_uncertainty(0.25e-6)
    tls = [build_timeline("HalfLoop", {"T1": 5.4 * US, "T2": 5.4 * US, "Td1": td}, field) for td in (0.0, 1e-4, 3e-4)]
    out = run_batch(tls, init)
    for i, tl in enumerate(tls):
        rec = run(tl, init)
        assert out["contrast"][i] == pytest.approx(rec.final_contrast, rel=1e-12)
        assert out["phase"][i] == pytest.approx(rec.final_phase, abs=1e-12)
        assert out["dz"][i] == pytest.approx(rec.delta_z[-1], rel=1e-12, abs=1e-20)


def test_delay_scan_varies_both_delays_for_full_loops():
    field = CalibratedAcceleration(481.0)
    init = GaussianState.minimum_uncertainty(0.25e-6)
    full = build_timeline("CurrentInversionA", SYM, field)
    out = delay_scan(full, init, [50 * US, 400 * US])
    assert np.all(out["contrast"] > 1 - 1e-10)
    out = delay_scan(full, init, [300 * US, 50 * US], "Td1")  # Td2 stays at 300 us
    assert out["contrast"][0] > 1 - 1e-10
    assert out["contrast"][1] < 0.5


def test_fringe_scan_is_ramsey_curve():
    field = CalibratedAcceleration(481.0)
    init = GaussianState.minimum_uncertainty(0.25e-6)
    tl = build_timeline("HalfLoop", {"T1": 5.4 * US, "T2": 5.4 * US, "Td1": 100 * US}, field)
    rec = run(tl, init)
    phi = np.linspace(0, 2 * np.pi, 25)
    rows = fringe_scan(tl, init, phi)
    assert np.allclose(rows[:, 1], ramsey_population(rec.final_phase, rec.final_contrast, phi), atol=1e-15)


def test_spin_coherence_envelope():
    field = CalibratedAcceleration(635.0)
    init = GaussianState.minimum_uncertainty(1e-6)
    tl = build_timeline("CurrentInversionA", SYM, field, spin_coherence_time=1e-3)
    assert run(tl, init).final_contrast == pytest.approx(math.exp(-tl.total_time / 1e-3), rel=1e-10)


def test_mixed_state_contrast_matches_displaced_ensemble():
    """A partially coherent packet is an ensemble of displaced pure cores; average their overlaps."""
    init = released_state(CondensateParams(1e4, 2 * np.pi * 40, 2 * np.pi * 40, 2 * np.pi * 126))
    assert init.purity < 0.9
    field = CalibratedAcceleration(481.0)
    tl = build_timeline("HalfLoop", {"T1": 5.4 * US, "T2": 4.0 * US, "Td1": 150 * US}, field)
    mixed = run(tl, init)
    core = init.core()
    ex = init.covariance - core.covariance
    L = np.linalg.cholesky(ex)
    x, w = np.polynomial.hermite_e.hermegauss(24)
    w = w / w.sum()
    acc = 0j
    for xi, wi in zip(x, w):
        for xj, wj in zip(x, w):
            dz, dp = L @ np.array([xi, xj])
            rec = run(tl, GaussianState(core.z + dz, core.p + dp, core.var_z, core.var_p, core.cov_zp))
            acc += wi * wj * rec.contrast[-1] * np.exp(1j * rec.rel_phase[-1])
    assert mixed.contrast[-1] == pytest.approx(abs(acc), rel=1e-8)
    assert np.angle(np.exp(1j * (mixed.rel_phase[-1] - np.angle(acc)))) == pytest.approx(0.0, abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2e-6, 5e-6), st.floats(-5.0, 5.0), st.floats(-5.0, 5.0))
def test_hd_contrast_equals_overlap_for_equal_pure_states(sigma, nz, np_):
    sp = HBAR / (2 * sigma)
    a = GaussianState.minimum_uncertainty(sigma)
    b = GaussianState.minimum_uncertainty(sigma, z=nz * sigma, p=np_ * sp)
    mag, _ = gaussian_overlap(a, b)
    assert mag == pytest.approx(float(hd_contrast(b.z, b.p, sigma, sp)), rel=1e-10, abs=1e-300)


def test_overlap_phase_for_equal_covariances():
    a = GaussianState.minimum_uncertainty(1e-6, z=0.0, p=1e-29, global_phase=0.1)
    b = GaussianState.minimum_uncertainty(1e-6, z=0.4e-6, p=3e-29, global_phase=0.7)
    _, ph = gaussian_overlap(a, b)
    pbar = 0.5 * (a.p + b.p)
    assert ph == pytest.approx(np.angle(np.exp(1j * (0.6 - pbar * 0.4e-6 / HBAR))), abs=1e-12)


def test_overlap_is_hermitian():
    a = GaussianState.minimum_uncertainty(1e-6, z=0.1e-6, p=1e-29, chirp=3e10)
    b = GaussianState.minimum_uncertainty(1.5e-6, z=-0.4e-6, p=-2e-29, chirp=-1e10)
    m1, p1 = gaussian_overlap(a, b)
    m2, p2 = gaussian_overlap(b, a)
    assert m1 == pytest.approx(m2, rel=1e-13)
    assert p1 == pytest.approx(-p2, abs=1e-13)
    assert gaussian_overlap(a, a)[0] == pytest.approx(1.0, rel=1e-14)


def test_hd_contrast_rejects_bad_width():
    with pytest.raises(ValueError):
        hd_contrast(0.0, 0.0, 0.0, 1.0)


def test_linear_phase_spread():
    assert linear_phase_spread(2.0, 3.0, 5.0) == pytest.approx(30.0 / HBAR)


def test_jitter_reproducible_and_zero_jitter_is_noiseless():
    tl = build_timeline("CurrentInversionA", SYM, CalibratedAcceleration(635.0))
    init = GaussianState.minimum_uncertainty(0.5e-6)
    j = Jitter(1e-3, 5e-9)
    assert jitter_monte_carlo(tl, j, 50, 7, init) == jitter_monte_carlo(tl, j, 50, 7, init)
    std, c = jitter_monte_carlo(tl, Jitter(), 10, 0, init)
    assert std == pytest.approx(0.0, abs=1e-12)
    assert c == pytest.approx(run(tl, init).final_contrast, rel=1e-12)
    with pytest.raises(ValueError):
        Jitter(-1.0)
    with pytest.raises(ValueError):
        jitter_monte_carlo(tl, j, 1, 0, init)


def test_jitter_phase_spread_grows_with_current_noise():
    tl = build_timeline("CurrentInversionA", SYM, CalibratedAcceleration(635.0))
    init = GaussianState.minimum_uncertainty(0.5e-6)
    s1, _ = jitter_monte_carlo(tl, Jitter(1e-4), 400, 1, init)
    s2, _ = jitter_monte_carlo(tl, Jitter(4e-4), 400, 1, init)
    assert 3.0 < s2 / s1 < 5.0
