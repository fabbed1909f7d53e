import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgilab.analysis import (
    envelope_tau_prediction,
    extract_lp,
    extract_lz,
    fit_gaussian_sine,
    fit_sine,
    gaussian_sine,
    gaussian_sine_jacobian,
)
from sgilab.constants import M_RB87
from sgilab.interferometer import build_timeline, delay_scan, run_batch
from sgilab.magnetics import CalibratedAcceleration
from sgilab.wavepacket import GaussianState

US = 1e-6
PHI = np.linspace(0, 2 * np.pi, 50)


def _sine(C, phi0, c, x=PHI):
    return np.column_stack([x, 0.5 * C * np.sin(x + phi0) + c])


def test_fit_sine_round_trip():
    f = fit_sine(_sine(0.8, 0.3, 0.5))
    assert f.params["C"] == pytest.approx(0.8, rel=1e-6)
    assert f.params["phi0"] == pytest.approx(0.3, rel=1e-6)
    assert f.params["c"] == pytest.approx(0.5, rel=1e-6)
    assert f.converged and f.residual_rms < 1e-8
    assert np.allclose(f.predict(PHI), _sine(0.8, 0.3, 0.5)[:, 1], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(-3.0, 3.0), st.floats(0.3, 0.7))
def test_fit_sine_round_trip_property(C, phi0, c):
    f = fit_sine(_sine(C, phi0, c))
    assert f.params["C"] == pytest.approx(C, rel=1e-8)
    assert np.angle(np.exp(1j * (f.params["phi0"] - phi0))) == pytest.approx(0.0, abs=1e-8)


def test_fit_sine_flat_data_gives_zero_contrast():
    f = fit_sine(np.column_stack([PHI, np.full_like(PHI, 0.5)]))
    assert f.params["C"] == pytest.approx(0.0, abs=1e-12)


def test_fit_sine_clips_overcontrast():
    f = fit_sine(_sine(1.3, 0.0, 0.5))
    assert f.params["C"] == pytest.approx(1.05)
    assert "contrast_clipped" in f.flags


def test_fit_sine_input_validation():
    with pytest.raises(ValueError):
        fit_sine(_sine(0.5, 0, 0.5)[:3])
    with pytest.raises(ValueError):
        fit_sine(_sine(0.5, 0, 0.5, np.linspace(0, 2.0, 10)))


def test_gaussian_sine_delay_shape_round_trip():
    td = np.linspace(0, 400 * US, 81)
    truth = dict(A=0.45, x0=0.0, tau=186.8 * US, phi0=0.4, k1=1.5e4, k2=2e7, c=0.5)
    y = gaussian_sine(td, **truth)
    f = fit_gaussian_sine(np.column_stack([td, y]), phase_degree=2, fixed={"x0": 0.0})
    for k, v in truth.items():
        assert f.params[k] == pytest.approx(v, rel=1e-6, abs=1e-12)
    assert f.residual_rms < 1e-8


def test_gaussian_sine_tau_with_noise_within_two_percent():
    td = np.linspace(0, 400 * US, 81)
    y = gaussian_sine(td, 0.45, 0.0, 186.8 * US, np.pi / 2, 0.0, 0.0, 0.5)
    rng = np.random.default_rng(3)
    f = fit_gaussian_sine(np.column_stack([td, y + 0.002 * rng.standard_normal(td.size)]), phase_degree=0, fixed={"x0": 0.0})
    assert f.params["tau"] == pytest.approx(186.8 * US, rel=0.02)


def test_gaussian_sine_free_center_round_trip():
    x = np.linspace(-8 * US, 12 * US, 81)
    truth = dict(A=0.45, x0=2 * US, tau=3 * US, phi0=-0.4, k1=1.5e6, k2=0.0, c=0.5)
    f = fit_gaussian_sine(np.column_stack([x, gaussian_sine(x, **truth)]), phase_degree=1)
    for k, v in truth.items():
        assert f.params[k] == pytest.approx(v, rel=1e-6, abs=1e-12)


def test_pure_sine_flags_unbounded_tau():
    x = np.linspace(0, 400 * US, 81)
    y = 0.4 * np.sin(2e4 * x + 0.3) + 0.5
    f = fit_gaussian_sine(np.column_stack([x, y]), phase_degree=1)
    assert "tau_unbounded" in f.flags
    assert f.extras["tau_lower_bound"] == pytest.approx(3 * 400 * US)


def test_gaussian_sine_validation():
    x = np.linspace(0, 1, 7)
    with pytest.raises(ValueError):
        fit_gaussian_sine(np.column_stack([x, x]))
    x = np.linspace(0, 1, 20)
    with pytest.raises(ValueError):
        fit_gaussian_sine(np.column_stack([x, x]), phase_degree=3)
    with pytest.raises(ValueError):
        fit_gaussian_sine(np.column_stack([x, x]), fixed={"q": 1.0})


def test_analytic_jacobian_matches_finite_differences():
    params = dict(A=0.45, x0=20 * US, tau=90 * US, phi0=0.4, k1=1.5e4, k2=2e7, c=0.5)
    x = np.linspace(0, 400 * US, 41)
    J = gaussian_sine_jacobian(params, x)
    lam = 0.5 / params["tau"] ** 2
    base = [params["A"], params["x0"], lam, params["phi0"], params["k1"], params["k2"], params["c"]]

    def model(p):
        return p[0] * np.exp(-p[2] * (x - p[1]) ** 2) * np.sin(p[3] + p[4] * x + p[5] * x * x) + p[6]

    for i in range(7):
        h = 1e-6 * max(abs(base[i]), 1e-9)
        up, dn = list(base), list(base)
        up[i] += h
        dn[i] -= h
        fd = (model(up) - model(dn)) / (2 * h)
        scale = np.max(np.abs(fd))
        assert np.max(np.abs(J[:, i] - fd)) / scale < 1e-5


def test_fit_sine_error_scales_as_inverse_sqrt_n():
    rng = np.random.default_rng(11)
    ns = (25, 100, 400)
    rms = []
    for n in ns:
        phi = np.linspace(0, 2 * np.pi, n, endpoint=False)
        clean = 0.5 * 0.8 * np.sin(phi + 0.3) + 0.5
        errs = [fit_sine(np.column_stack([phi, clean + 0.01 * rng.standard_normal(n)])).params["C"] - 0.8 for _ in range(100)]
        rms.append(np.sqrt(np.mean(np.square(errs))))
    slope = np.polyfit(np.log(ns), np.log(rms), 1)[0]
    assert -0.6 <= slope <= -0.4


def test_extract_lz_examples():
    assert extract_lz(481.6, 5.4 * US, 186.8 * US) == pytest.approx(0.50e-6, rel=0.02)
    assert extract_lz(481.6, 5.4 * US, 0.0) == pytest.approx(481.6 * (5.4 * US) ** 2)
    assert extract_lz(963.2, 5.4 * US, 186.8 * US) == pytest.approx(2 * extract_lz(481.6, 5.4 * US, 186.8 * US))
    assert envelope_tau_prediction(extract_lz(481.6, 5.4 * US, 186.8 * US), 481.6, 5.4 * US) == pytest.approx(186.8 * US)
    with pytest.raises(ValueError):
        extract_lz(-1.0, 1.0, 1.0)


def _kick_scan(sigma_z, dv_max, n=81, a=481.0):
    init = GaussianState.minimum_uncertainty(sigma_z)
    dv = np.linspace(0, dv_max, n)
    out = run_batch([build_timeline("SingleKick", {"T1": v / a}, CalibratedAcceleration(a)) for v in dv], init)
    return np.column_stack([dv, 0.5 + 0.5 * out["contrast"]])


def test_extract_lp_from_simulated_scan():
    est = extract_lp(_kick_scan(6.1e-6, 0.4e-3), M_RB87)
    assert est.value / M_RB87 == pytest.approx(0.118e-3, rel=0.05)
    assert not est.flagged
    doubled = extract_lp(_kick_scan(12.2e-6, 0.2e-3), M_RB87)
    assert doubled.value == pytest.approx(est.value / 2, rel=1e-3)


def test_extract_lp_flags_scan_without_decay():
    est = extract_lp(_kick_scan(6.1e-6, 0.01e-3), M_RB87)
    assert est.flagged


def test_half_loop_fit_matches_coherence_prediction():
    a, T1, lz = 481.0, 5.4 * US, 0.5e-6
    tl = build_timeline("HalfLoop", {"T1": T1, "T2": T1}, CalibratedAcceleration(a))
    td = np.linspace(0, 400 * US, 81)
    c = delay_scan(tl, GaussianState.minimum_uncertainty(lz / 2), td)["contrast"]
    f = fit_gaussian_sine(np.column_stack([td, c]), phase_degree=0, fixed={"x0": 0.0, "c": 0.0})
    assert f.params["tau"] == pytest.approx(envelope_tau_prediction(lz, a, T1), rel=0.10)
