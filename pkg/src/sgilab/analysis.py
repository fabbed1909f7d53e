"""Fringe fitting and coherence-scale extraction.

Two model families are fitted with Levenberg-Marquardt and analytic
Jacobians:

* ``fit_sine``: P = 0.5 C sin(phi + phi0) + c
* ``fit_gaussian_sine``: y = A exp(-(x - x0)^2 / (2 tau^2)) sin(phi0 + k1 x + k2 x^2) + c

Internally the abscissa is divided by max|x| so that all parameters are of
order one; results are mapped back to physical units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

CONTRAST_CLIP_MARGIN = 0.05
TAU_SPAN_FACTOR = 3.0


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict[str, float]
    uncertainties: dict[str, float]
    covariance: np.ndarray
    param_names: tuple[str, ...]
    residual_rms: float
    converged: bool
    flags: tuple[str, ...] = ()
    extras: dict[str, float] = field(default_factory=dict)

    def predict(self, x):
        p = self.params
        if self.model == "sine":
            return 0.5 * p["C"] * np.sin(np.asarray(x) + p["phi0"]) + p["c"]
        return gaussian_sine(x, p["A"], p["x0"], p["tau"], p["phi0"], p["k1"], p["k2"], p["c"])


def gaussian_sine(x, A, x0, tau, phi0, k1, k2, c):
    x = np.asarray(x, dtype=float)
    env = np.exp(-0.5 * ((x - x0) / tau) ** 2) if np.isfinite(tau) else 1.0
    return A * env * np.sin(phi0 + k1 * x + k2 * x * x) + c


def _as_xy(data):
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ValueError("data must be rows of (x, y)")
    order = np.argsort(arr[:, 0], kind="stable")
    return arr[order, 0], arr[order, 1]


def _covariance(jac, resid, n_free):
    dof = max(len(resid) - n_free, 1)
    s2 = float(resid @ resid) / dof
    return s2 * np.linalg.pinv(jac.T @ jac)


# --- pure sine ------------------------------------------------------------------


def _sine_model(theta, phi):
    C, phi0, c = theta
    return 0.5 * C * np.sin(phi + phi0) + c


def _sine_jac(theta, phi):
    C, phi0, _ = theta
    return np.column_stack([0.5 * np.sin(phi + phi0), 0.5 * C * np.cos(phi + phi0), np.ones_like(phi)])


def fit_sine(data, clip_margin: float = CONTRAST_CLIP_MARGIN) -> FitResult:
    """Fit P(phi) = 0.5 C sin(phi + phi0) + c to a fringe.

    The linear problem in (sin, cos, 1) gives the starting point, so the
    nonlinear refinement only polishes it. C is reported non-negative and
    clipped to [0, 1 + clip_margin]; a clip is flagged.
    """
    phi, y = _as_xy(data)
    if len(phi) < 4:
        raise ValueError("need at least 4 points")
    if np.ptp(phi) <= np.pi:
        raise ValueError("phase scan must span more than half a period")

    design = np.column_stack([np.sin(phi), np.cos(phi), np.ones_like(phi)])
    (alpha, beta, c0), *_ = np.linalg.lstsq(design, y, rcond=None)
    theta0 = np.array([2.0 * np.hypot(alpha, beta), np.arctan2(beta, alpha), c0])
    sol = least_squares(
        lambda t: _sine_model(t, phi) - y, theta0, jac=lambda t: _sine_jac(t, phi), method="lm", xtol=1e-15, ftol=1e-15
    )
    C, phi0, c = sol.x
    resid = sol.fun
    cov = _covariance(sol.jac, resid, 3)
    if C < 0:
        C, phi0 = -C, phi0 + np.pi
    phi0 = float(np.angle(np.exp(1j * phi0)))
    flags = []
    if C > 1.0 + clip_margin:
        C = 1.0 + clip_margin
        flags.append("contrast_clipped")
    if not sol.success:
        flags.append("not_converged")
    err = np.sqrt(np.maximum(np.diag(cov), 0.0))
    names = ("C", "phi0", "c")
    return FitResult(
        model="sine",
        params={"C": float(C), "phi0": phi0, "c": float(c)},
        uncertainties=dict(zip(names, map(float, err))),
        covariance=cov,
        param_names=names,
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        converged=bool(sol.success),
        flags=tuple(flags),
        extras={"clip_margin": clip_margin},
    )


# --- Gaussian envelope times a sine ----------------------------------------------

_GS_NAMES = ("A", "x0", "lam", "phi0", "k1", "k2", "c")


def _gs_value(p, u):
    A, u0, lam, phi0, k1, k2, c = p
    d = u - u0
    # exponent capped so trial steps with an inverted envelope stay finite
    return A * np.exp(np.minimum(-lam * d * d, 700.0)) * np.sin(phi0 + k1 * u + k2 * u * u) + c


def _gs_jac(p, u):
    A, u0, lam, phi0, k1, k2, _ = p
    d = u - u0
    E = np.exp(np.minimum(-lam * d * d, 700.0))
    ph = phi0 + k1 * u + k2 * u * u
    s = E * np.sin(ph)
    co = A * E * np.cos(ph)
    return np.column_stack([s, 2.0 * A * lam * d * s, -A * d * d * s, co, co * u, co * u * u, np.ones_like(u)])


def gaussian_sine_jacobian(params: dict[str, float], x) -> np.ndarray:
    """Analytic Jacobian in physical units, columns (A, x0, lam, phi0, k1, k2, c) with lam = 1/(2 tau^2)."""
    p = [params["A"], params["x0"], 0.5 / params["tau"] ** 2, params["phi0"], params["k1"], params["k2"], params["c"]]
    return _gs_jac(np.array(p, dtype=float), np.asarray(x, dtype=float))


def _envelope_guess(u, r):
    """Center and 1/sqrt(e) half-width of the rectified signal ``r``."""
    n = len(u)
    win = max(3, n // 12)
    kernel = np.ones(win)
    padded = np.pad(r, win // 2, mode="edge")
    env = np.array([padded[i : i + win].max() for i in range(n)])
    env = np.convolve(np.pad(env, win // 2, mode="edge"), kernel / win, mode="valid")[:n]
    i0 = int(np.argmax(env))
    peak = env[i0]
    level = peak * np.exp(-0.5)
    below = np.nonzero(env < level)[0]
    widths = [abs(u[j] - u[i0]) for j in below]
    width = min(widths) if widths else np.ptp(u)
    return u[i0], max(width, np.ptp(u) / n)


def _gs_starts(u, y, degree, free):
    c0 = float(np.mean(y)) if degree > 0 else float(min(y[0], y[-1]))
    yc = y - c0
    A0 = 0.5 * float(np.ptp(y)) if degree > 0 else float(yc[np.argmax(np.abs(yc))])
    u0, w = _envelope_guess(u, np.abs(yc))
    lam0 = 0.5 / w**2
    if degree == 0:
        return [np.array([A0, u0, lam0, np.pi / 2, 0.0, 0.0, c0])]

    grid = np.linspace(u[0], u[-1], max(64, 4 * len(u)))
    yi = np.interp(grid, u, yc)
    spec = np.abs(np.fft.rfft(yi * np.hanning(len(grid))))
    freqs = np.fft.rfftfreq(len(grid), grid[1] - grid[0])
    spec[0] = 0.0
    k0 = 2.0 * np.pi * freqs[int(np.argmax(spec))]
    weights = np.exp(-lam0 * (u - u0) ** 2)

    def phase_for(k):
        s = np.sum(yc * weights * np.sin(k * u))
        co = np.sum(yc * weights * np.cos(k * u))
        return float(np.arctan2(co, s))

    starts = []
    for kf, lf in ((1.0, 1.0), (1.0, 0.25), (1.0, 4.0), (0.85, 1.0), (1.15, 1.0)):
        k = k0 * kf
        starts.append(np.array([abs(A0), u0, lam0 * lf, phase_for(k), k, 0.0, c0]))
    return starts


def fit_gaussian_sine(
    data,
    phase_degree: int = 1,
    fixed: dict[str, float] | None = None,
) -> FitResult:
    """Fit y = A exp(-(x-x0)^2/(2 tau^2)) sin(phi0 + k1 x + k2 x^2) + c.

    ``phase_degree`` (0, 1 or 2) sets the highest free power of the phase
    polynomial; with degree 0 the model is a bare Gaussian and phi0 is fixed
    to pi/2 unless given. ``fixed`` pins any of A, x0, tau, phi0, k1, k2, c
    (e.g. ``{"x0": 0.0}`` for an envelope centred at zero delay). An envelope
    that does not decay within the data (tau above 3x the span, or an
    inverted envelope) is flagged ``tau_unbounded`` and the span-based lower
    bound is reported in ``extras``.
    """
    x, y = _as_xy(data)
    if len(x) < 8:
        raise ValueError("need at least 8 points")
    if phase_degree not in (0, 1, 2):
        raise ValueError("phase polynomial degree must be 0, 1 or 2")
    fixed = dict(fixed or {})
    unknown = set(fixed) - {"A", "x0", "tau", "phi0", "k1", "k2", "c"}
    if unknown:
        raise ValueError(f"unknown fixed parameters: {sorted(unknown)}")
    if phase_degree < 2:
        fixed.setdefault("k2", 0.0)
    if phase_degree < 1:
        fixed.setdefault("k1", 0.0)
        fixed.setdefault("phi0", np.pi / 2)

    xs = float(np.max(np.abs(x)))
    if xs == 0:
        raise ValueError("abscissa is identically zero")
    u = x / xs
    to_internal = {
        "A": lambda v: v,
        "x0": lambda v: v / xs,
        "tau": lambda v: 0.5 * (xs / v) ** 2,
        "phi0": lambda v: v,
        "k1": lambda v: v * xs,
        "k2": lambda v: v * xs * xs,
        "c": lambda v: v,
    }
    name_map = dict(zip(("A", "x0", "tau", "phi0", "k1", "k2", "c"), range(7)))
    fixed_idx = {name_map[k]: to_internal[k](float(v)) for k, v in fixed.items()}
    free = [i for i in range(7) if i not in fixed_idx]

    def full(theta):
        p = np.empty(7)
        for i, v in fixed_idx.items():
            p[i] = v
        p[free] = theta
        return p

    starts = _gs_starts(u, y, phase_degree, free)
    best = None
    for start in starts:
        for i, v in fixed_idx.items():
            start[i] = v
        sol = least_squares(
            lambda t: _gs_value(full(t), u) - y,
            start[free],
            jac=lambda t: _gs_jac(full(t), u)[:, free],
            method="lm",
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=4000,
        )
        if best is None or sol.cost < best.cost:
            best = sol
        if sol.success and np.sqrt(np.mean(sol.fun**2)) < 1e-12:
            break

    p = full(best.x)
    cov_u = np.zeros((7, 7))
    cov_u[np.ix_(free, free)] = _covariance(best.jac, best.fun, len(free))

    A, u0, lam, phi0, k1, k2, c = p
    if A < 0 and "A" not in fixed and "phi0" not in fixed:
        A, phi0 = -A, phi0 + np.pi
    # physical units: x0 = xs u0, lam_x = lam / xs^2, k1 = k1/xs, k2 = k2/xs^2
    scale = np.array([1.0, xs, xs**-2, 1.0, 1.0 / xs, xs**-2, 1.0])
    cov = cov_u * np.outer(scale, scale)
    lam_x = lam / xs**2
    span = float(np.ptp(x))
    flags = []
    if lam_x > 0:
        tau = float(np.sqrt(0.5 / lam_x))
        tau_err = float(np.sqrt(max(cov[2, 2], 0.0)) * tau / (2.0 * lam_x))
    else:
        tau, tau_err = float("inf"), float("inf")
    if not tau < TAU_SPAN_FACTOR * span:
        flags.append("tau_unbounded")
    if not best.success:
        flags.append("not_converged")

    params = {
        "A": float(A),
        "x0": float(xs * u0),
        "tau": tau,
        "phi0": float(np.angle(np.exp(1j * phi0))) if "phi0" not in fixed else float(phi0),
        "k1": float(k1 / xs),
        "k2": float(k2 / xs**2),
        "c": float(c),
    }
    err = np.sqrt(np.maximum(np.diag(cov), 0.0))
    unc = {name: float(err[i]) for i, name in enumerate(("A", "x0", "lam", "phi0", "k1", "k2", "c"))}
    unc.pop("lam")
    unc["tau"] = tau_err
    for k in fixed:
        unc[k] = 0.0
    resid = best.fun
    return FitResult(
        model="gaussian_sine",
        params=params,
        uncertainties=unc,
        covariance=cov,
        param_names=_GS_NAMES,
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        converged=bool(best.success),
        flags=tuple(flags),
        extras={"tau_lower_bound": TAU_SPAN_FACTOR * span} if "tau_unbounded" in flags else {},
    )


# --- coherence scales -------------------------------------------------------------


def extract_lz(a: float, T1: float, tau: float) -> float:
    """l_z = a T1^2 + a T1 tau."""
    if a < 0 or T1 < 0 or tau < 0:
        raise ValueError("inputs must be non-negative")
    return a * T1 * T1 + a * T1 * tau


def envelope_tau_prediction(l_z: float, a: float, T1: float) -> float:
    """Inverse of ``extract_lz``: tau = (l_z - a T1^2) / (a T1)."""
    return (l_z - a * T1 * T1) / (a * T1)


@dataclass(frozen=True)
class WidthEstimate:
    value: float
    fit: FitResult
    flagged: bool
    reason: str = ""


def extract_lp(scan, mass: float, phase_degree: int = 0) -> WidthEstimate:
    """Momentum coherence width from a single-kick scan of (delta_v, P1).

    With the readout aligned to the fringe peak (the default) the scan is a
    Gaussian decaying to 1/2 and is fitted with a zero-centred envelope;
    ``phase_degree`` > 0 fits a raw oscillating scan instead. l_p is the
    mass times the velocity at which the envelope falls to 1/sqrt(e).
    """
    fit = fit_gaussian_sine(scan, phase_degree=phase_degree, fixed={"x0": 0.0})
    reasons = []
    if "tau_unbounded" in fit.flags:
        reasons.append("contrast does not decay within the scan")
    if not fit.converged:
        reasons.append("fit did not converge")
    tau = fit.params["tau"]
    if np.isfinite(tau) and tau > np.max(np.abs(np.asarray(scan)[:, 0])):
        reasons.append("scan ends before the 1/sqrt(e) point")
    return WidthEstimate(mass * tau, fit, bool(reasons), "; ".join(reasons))
