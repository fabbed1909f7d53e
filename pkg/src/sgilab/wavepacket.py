"""Gaussian wavepackets: states, condensate initial conditions and propagation.

A branch is described by its centroid (z, p), the Wigner covariance
(var_z, var_p, cov_zp) and the phase of the wavefunction at the centroid.
Pure states satisfy var_z * var_p - cov_zp**2 = (hbar/2)**2; larger
determinants describe partially coherent (Gaussian Schell) packets, which are
handled as a pure "core" with the same shape plus an incoherent spread of
centroids.

Propagation keeps the packet Gaussian by expanding the potential to second
order about the centroid. When the potential is exactly quadratic (uniform
gradient with constant curvature, calibrated acceleration, field off) the
update is closed form, including the classical action and the metaplectic
(Gouy) phase. Otherwise a fixed-step RK4 with re-expansion at every stage is
used, with a step-doubling (Richardson) check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .constants import G_GRAVITY, GF_RB87_F2, HBAR, M_RB87, MU_B
from .magnetics import CalibratedAcceleration, FieldModel

UNCERTAINTY_RTOL = 1e-6
RK4_MAX_STEP = 100e-9
RK4_MIN_STEPS = 64


@dataclass(frozen=True)
class GaussianState:
    z: float
    p: float
    var_z: float
    var_p: float
    cov_zp: float = 0.0
    global_phase: float = 0.0

    def __post_init__(self):
        if not (self.var_z > 0 and self.var_p > 0):
            raise ValueError("variances must be positive")
        det = self.var_z * self.var_p - self.cov_zp**2
        # rounding in var_z*var_p - cov**2 scales with var_z*var_p for strongly chirped packets
        floor = (0.5 * HBAR) ** 2 * (1.0 - UNCERTAINTY_RTOL) - 1e-12 * self.var_z * self.var_p
        if det < floor:
            raise ValueError(
                f"covariance violates the uncertainty relation (det/(hbar/2)^2 = {det / (0.5 * HBAR) ** 2:.6g})"
            )

    @classmethod
    def minimum_uncertainty(cls, sigma_z, z=0.0, p=0.0, chirp=0.0, global_phase=0.0) -> "GaussianState":
        """Pure Gaussian of rms width ``sigma_z`` with quadratic phase ``chirp`` (rad/m^2)."""
        var_z = sigma_z**2
        cov = 2.0 * HBAR * chirp * var_z
        var_p = HBAR**2 / (4.0 * var_z) + cov**2 / var_z
        return cls(z, p, var_z, var_p, cov, global_phase)

    @classmethod
    def from_coherence_scales(cls, l_z, l_p, z=0.0, p=0.0) -> "GaussianState":
        """Uncorrelated packet whose coherence length / width are ``l_z`` and ``l_p``."""
        return cls(z, p, (HBAR / l_p) ** 2, (HBAR / l_z) ** 2, 0.0)

    @property
    def sigma_z(self) -> float:
        return math.sqrt(self.var_z)

    @property
    def sigma_p(self) -> float:
        return math.sqrt(self.var_p)

    @property
    def uncertainty_product(self) -> float:
        return self.var_z * self.var_p - self.cov_zp**2

    @property
    def purity(self) -> float:
        return 0.5 * HBAR / math.sqrt(max(self.uncertainty_product, (0.5 * HBAR) ** 2))

    @property
    def is_pure(self) -> bool:
        return self.purity > 1.0 - 1e-9

    @property
    def chirp(self) -> float:
        """Quadratic phase curvature (rad/m^2) of the coherent core."""
        return self.cov_zp / (2.0 * HBAR * self.var_z)

    def core(self) -> "GaussianState":
        """The pure state with the same shape; identical to self for pure states."""
        s = self.purity
        return replace(self, var_z=self.var_z * s, var_p=self.var_p * s, cov_zp=self.cov_zp * s)

    def wavefunction(self, z):
        """Wavefunction of the coherent core on the grid ``z``."""
        c = self.core()
        x = np.asarray(z, dtype=float) - c.z
        amp = (2.0 * np.pi * c.var_z) ** -0.25
        expo = -x * x / (4.0 * c.var_z) + 1j * (c.chirp * x * x + c.p * x / HBAR + c.global_phase)
        return amp * np.exp(expo)

    @property
    def covariance(self) -> np.ndarray:
        return np.array([[self.var_z, self.cov_zp], [self.cov_zp, self.var_p]])


@dataclass(frozen=True)
class CondensateParams:
    N: float
    omega_x: float
    omega_y: float
    omega_z: float
    a_s: float = 5.18e-9
    T_d0: float = 1e-3
    mass: float = M_RB87

    def __post_init__(self):
        for name in ("N", "omega_x", "omega_y", "omega_z", "a_s", "T_d0", "mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def omega_bar(self) -> float:
        return (self.omega_x * self.omega_y * self.omega_z) ** (1.0 / 3.0)


@dataclass(frozen=True)
class CoherenceScales:
    l_z: float
    l_p: float

    def __post_init__(self):
        if not (self.l_z > 0 and self.l_p > 0):
            raise ValueError("coherence scales must be positive")


def thomas_fermi(params: CondensateParams) -> tuple[float, float]:
    """Chemical potential (J) and Thomas-Fermi half-length along z (m)."""
    m = params.mass
    mu52 = 15.0 * HBAR**2 * math.sqrt(m) * params.N * params.omega_bar**3 * params.a_s / 2**2.5
    mu = mu52 ** (2.0 / 5.0)
    w0 = math.sqrt(2.0 * mu / m) / params.omega_z
    return mu, w0


def tf_to_gaussian(w0: float) -> float:
    """Gaussian rms width matching a Thomas-Fermi profile of half-length ``w0``."""
    if w0 <= 0:
        raise ValueError("w0 must be positive")
    return 0.41 * w0


def expand_released(sigma0: float, omega: float, t: float) -> float:
    """Width after release from a trap of frequency ``omega``: sigma0 sqrt(1 + omega^2 t^2)."""
    if sigma0 <= 0 or t < 0:
        raise ValueError("need sigma0 > 0 and t >= 0")
    return sigma0 * math.sqrt(1.0 + (omega * t) ** 2)


def released_state(params: CondensateParams, z=0.0, p=0.0) -> GaussianState:
    """Packet at the moment of release.

    The in-trap width is the Gaussian equivalent of the Thomas-Fermi profile;
    the momentum width m omega_z sigma0 is the asymptotic expansion rate from
    the converted mean-field energy, so free flight for a time t reproduces
    ``expand_released``.
    """
    _, w0 = thomas_fermi(params)
    sigma0 = tf_to_gaussian(w0)
    sigma_p = max(params.mass * params.omega_z * sigma0, HBAR / (2.0 * sigma0))
    return GaussianState(z, p, sigma0**2, sigma_p**2, 0.0)


def coherence_scales(state: GaussianState) -> CoherenceScales:
    return CoherenceScales(l_z=HBAR / state.sigma_p, l_p=HBAR / state.sigma_z)


# --- propagation engine -----------------------------------------------------
# Packed layout: rows (z, p, var_z, cov_zp, var_p, phase), one column per packet.


def _pack(states) -> np.ndarray:
    return np.array([[s.z, s.p, s.var_z, s.cov_zp, s.var_p, s.global_phase] for s in states], dtype=float).T


def _unpack(y: np.ndarray) -> list[GaussianState]:
    return [GaussianState(z, p, vz, vp, cz, ph) for z, p, vz, cz, vp, ph in y.T]


def _normalize_spin(spin):
    if isinstance(spin, (tuple, list)):
        mF, gF = spin
    else:
        mF, gF = spin, GF_RB87_F2
    return float(mF) * float(gF)


class Potential:
    """U(z) and its first two derivatives for a set of packets.

    ``moments`` holds mF*gF per packet and ``factor`` the pulse sign/scale;
    ``model=None`` means the chip field is off.
    """

    def __init__(self, model: FieldModel | None, moments, factor=1.0, mass=M_RB87, gravity=True):
        self.model = model
        self.moments = np.asarray(moments, dtype=float)
        self.factor = np.asarray(factor, dtype=float)
        self.mass = mass
        self.gravity = gravity

    @property
    def is_quadratic(self) -> bool:
        return self.model is None or self.model.is_quadratic or not np.any(self.factor)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        m = self.mass
        if self.model is None or not np.any(self.factor):
            U = np.zeros_like(z)
            dU = np.zeros_like(z)
            d2U = np.zeros_like(z)
        elif isinstance(self.model, CalibratedAcceleration):
            a = self.factor * self.model.spin_acceleration(self.moments)
            U = -m * a * z
            dU = -m * a + 0.0 * z
            d2U = np.zeros_like(z)
        else:
            B, dB, d2B = self.model.field(z)
            s = -self.factor * self.moments * MU_B
            U, dU, d2U = s * B, s * dB, s * d2B
        if self.gravity:
            U = U + m * G_GRAVITY * z
            dU = dU + m * G_GRAVITY
        return U, dU, d2U


def _stumpff(kappa, t):
    """C, S, D, E for z'' = -kappa z: C = cos, S = sin/omega, D = int S, E = int D."""
    kappa = np.asarray(kappa, dtype=float)
    t = np.asarray(t, dtype=float)
    kappa, t = np.broadcast_arrays(kappa, t)
    x = kappa * t * t
    small = np.abs(x) < 0.25

    # power series, used near x = 0
    C = np.zeros_like(x)
    S = np.zeros_like(x)
    D = np.zeros_like(x)
    E = np.zeros_like(x)
    term = np.ones_like(x)
    for n in range(18):
        C += term
        S += term / (2 * n + 1)
        D += term / ((2 * n + 1) * (2 * n + 2))
        E += term / ((2 * n + 1) * (2 * n + 2) * (2 * n + 3))
        term = term * (-x) / ((2 * n + 1) * (2 * n + 2))
    S = S * t
    D = D * t * t
    E = E * t**3

    if not np.all(small):
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            w = np.sqrt(np.abs(kappa))
            wt = w * t
            pos = kappa > 0
            Cb = np.where(pos, np.cos(wt), np.cosh(wt))
            Sb = np.where(pos, np.sin(wt), np.sinh(wt)) / np.where(w > 0, w, 1.0)
            Db = (1.0 - Cb) / np.where(kappa != 0, kappa, 1.0)
            Eb = (t - Sb) / np.where(kappa != 0, kappa, 1.0)
        C = np.where(small, C, Cb)
        S = np.where(small, S, Sb)
        D = np.where(small, D, Db)
        E = np.where(small, E, Eb)
    return C, S, D, E


def _core_qp(vz, cz, vp):
    """Complex (Q, P) of the pure core, normalized so Im(conj(Q) P) = 1."""
    s = 0.5 * HBAR / np.sqrt(np.maximum(vz * vp - cz * cz, (0.5 * HBAR) ** 2))
    Q0 = np.sqrt(2.0 * vz * s / HBAR)
    P0 = (2.0 * cz * s / HBAR + 1j) / Q0
    return Q0, P0


def _advance_quadratic(y, pot: Potential, dt):
    """Exact update in a potential U0 - F0 z + k z^2 / 2."""
    m = pot.mass
    zero = np.zeros(y.shape[1])
    U0, dU0, k = pot(zero)
    F0 = -dU0
    z, p, vz, cz, vp, ph = y
    t = np.broadcast_to(np.asarray(dt, dtype=float), z.shape)
    kappa = k / m
    C, S, D, E = _stumpff(kappa, t)
    v = p / m
    z1 = z * C + v * S + F0 / m * D
    v1 = -kappa * z * S + v * C + F0 / m * S
    p1 = m * v1
    int_z = z * S + v * D + F0 / m * E
    action = 0.5 * (z1 * p1 - z * p) + 0.5 * F0 * int_z - U0 * t

    a, b, c, d = C, S / m, -k * S, C
    vz1 = a * a * vz + 2 * a * b * cz + b * b * vp
    cz1 = a * c * vz + (a * d + b * c) * cz + b * d * vp
    vp1 = c * c * vz + 2 * c * d * cz + d * d * vp

    Q0, P0 = _core_qp(vz, cz, vp)
    turn = np.zeros_like(t)
    t_rem = t
    osc = kappa > 0
    if np.any(osc):
        w = np.sqrt(np.where(osc, kappa, 1.0))
        n_half = np.where(osc, np.floor(w * t / np.pi), 0.0)
        turn = n_half * np.pi
        t_rem = np.where(osc, t - n_half * np.pi / w, t)
    Cr, Sr, _, _ = _stumpff(kappa, t_rem)
    Q1 = Cr * Q0 + Sr / m * P0
    arg = turn + np.angle(Q1)  # Q0 is real and positive
    ph1 = ph + action / HBAR - 0.5 * arg
    return np.array([z1, p1, vz1, cz1, vp1, ph1])


def _rhs(y, pot: Potential):
    z, p, vz, cz, vp, _ = y
    m = pot.mass
    U, dU, k = pot(z)
    det = np.maximum(vz * vp - cz * cz, (0.5 * HBAR) ** 2)
    vz_core = vz * 0.5 * HBAR / np.sqrt(det)
    return np.array(
        [
            p / m,
            -dU,
            2.0 * cz / m,
            vp / m - k * vz,
            -2.0 * k * cz,
            (p * p / (2.0 * m) - U) / HBAR - HBAR / (4.0 * m * vz_core),
        ]
    )


def _rk4(y, pot: Potential, dt, n):
    h = np.broadcast_to(np.asarray(dt, dtype=float), (y.shape[1],)) / n
    for _ in range(n):
        k1 = _rhs(y, pot)
        k2 = _rhs(y + 0.5 * h * k1, pot)
        k3 = _rhs(y + 0.5 * h * k2, pot)
        k4 = _rhs(y + h * k3, pot)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def rk4_steps(dt) -> int:
    dt_max = float(np.max(dt))
    return max(RK4_MIN_STEPS, int(math.ceil(dt_max / RK4_MAX_STEP)))


def _rk4_error(coarse, fine):
    scale_z = np.sqrt(fine[2])
    scale_p = np.sqrt(fine[4])
    return max(
        float(np.max(np.abs(coarse[0] - fine[0]) / scale_z)),
        float(np.max(np.abs(coarse[1] - fine[1]) / scale_p)),
        float(np.max(np.abs(coarse[2:5] - fine[2:5]) / np.abs(fine[2:5]).max(axis=0))),
        float(np.max(np.abs(coarse[5] - fine[5]))),
    )


def advance(y, pot: Potential, dt, richardson=True, tol=1e-9):
    """Advance packed packets by ``dt`` (scalar or one duration per packet)."""
    if np.all(np.asarray(dt) == 0):
        return y.copy()
    if pot.is_quadratic:
        return _advance_quadratic(y, pot, dt)
    n = rk4_steps(dt)
    coarse = _rk4(y, pot, dt, n)
    if not richardson:
        return coarse
    for _ in range(8):
        fine = _rk4(y, pot, dt, 2 * n)
        err = _rk4_error(coarse, fine)
        if err < tol:
            return fine
        coarse, n = fine, 2 * n
    warnings.warn(f"RK4 step-doubling did not reach tolerance ({err:.3g} > {tol:.3g})", RuntimeWarning)
    return fine


def propagate(
    state: GaussianState,
    model: FieldModel | None,
    spin,
    dt: float,
    gravity: bool = True,
    *,
    mass: float = M_RB87,
    field_sign: float = 1.0,
) -> GaussianState:
    """Evolve one packet for ``dt`` in the field of ``model`` (None: field off).

    ``spin`` is (mF, gF) or a bare mF with gF = 1/2.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    pot = Potential(model, [_normalize_spin(spin)], field_sign, mass, gravity)
    y = advance(_pack([state]), pot, dt)
    return _unpack(y)[0]
