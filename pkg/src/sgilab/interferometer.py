"""Pulse timelines, two-branch propagation, contrast and interferometer phase.

Segment order is T1, Td1, T2, T3, Td2, T4. The opening pi/2 pulse sits at
t = 0; pi pulses are placed at segment boundaries according to the scheme:

==================  ====================  ==============================
scheme              gradient signs        pi pulses (after segment)
==================  ====================  ==============================
CurrentInversionA   + - - +               end of T4
CurrentInversionB   + - - +               before T1 and end of T4
SpinInversion       + + + +               end of Td1 and end of T3
HalfLoop            + - (T3 = T4 = 0)     none
SingleKick          + (T2 = T3 = T4 = 0)  none
==================  ====================  ==============================

The closing pi/2 pulse is the readout; its phase is the scanned fringe phase.
Echo pi pulses after T4 are followed by field-free evolution that is common
to both branches and leaves their overlap unchanged, so the readout is
evaluated at the end of T4.

Branch b starts in spin label b (1 = |2,1>, 2 = |2,2>). Differences are
always branch 2 minus branch 1.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import Polynomial

from .constants import G_GRAVITY, GF_RB87_F2, HBAR, M_RB87, MU_B
from .errors import ConfigError
from .magnetics import CalibratedAcceleration, FieldModel, UniformGradient
from .spinsys import RfEvent, SpinState, ramsey_population, rotation_matrix
from .wavepacket import GaussianState, Potential, _pack, _unpack, advance, released_state, CondensateParams


class Scheme(str, enum.Enum):
    CURRENT_INVERSION_A = "CurrentInversionA"
    CURRENT_INVERSION_B = "CurrentInversionB"
    SPIN_INVERSION = "SpinInversion"
    HALF_LOOP = "HalfLoop"
    SINGLE_KICK = "SingleKick"

    @property
    def is_full_loop(self) -> bool:
        return self in (Scheme.CURRENT_INVERSION_A, Scheme.CURRENT_INVERSION_B, Scheme.SPIN_INVERSION)


_SEGMENTS = (("T1", 0), ("Td1", None), ("T2", 1), ("T3", 2), ("Td2", None), ("T4", 3))
_DURATION_KEYS = ("T1", "T2", "T3", "T4", "Td1", "Td2", "Td0")

_SIGNS = {
    Scheme.CURRENT_INVERSION_A: (1, -1, -1, 1),
    Scheme.CURRENT_INVERSION_B: (1, -1, -1, 1),
    Scheme.SPIN_INVERSION: (1, 1, 1, 1),
    Scheme.HALF_LOOP: (1, -1, -1, 1),
    Scheme.SINGLE_KICK: (1, 1, 1, 1),
}

# boundary index k = a pi pulse after the first k segments
_PI_AFTER = {
    Scheme.CURRENT_INVERSION_A: (6,),
    Scheme.CURRENT_INVERSION_B: (0, 6),
    Scheme.SPIN_INVERSION: (2, 4),
    Scheme.HALF_LOOP: (),
    Scheme.SINGLE_KICK: (),
}

# moment mF*gF of the two spin labels
_LABEL_MOMENT = {1: 1 * GF_RB87_F2, 2: 2 * GF_RB87_F2}


@dataclass(frozen=True)
class PulseTimeline:
    scheme: Scheme
    T1: float
    T2: float
    T3: float
    T4: float
    Td1: float
    Td2: float
    field: FieldModel | None
    Td0: float = 0.0
    rf_events: tuple[RfEvent, ...] = ()
    gradient_sign_per_pulse: tuple[int, int, int, int] = (1, -1, -1, 1)
    pulse_scale: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    gravity: bool = True
    spin_coherence_time: float | None = None
    mass: float = M_RB87

    @property
    def total_time(self) -> float:
        """2T = T1 + Td1 + T2 + T3 + Td2 + T4."""
        return self.T1 + self.Td1 + self.T2 + self.T3 + self.Td2 + self.T4

    def durations(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in _DURATION_KEYS}

    def segment_durations(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name, _ in _SEGMENTS)

    def boundary_times(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.segment_durations())])

    def with_durations(self, **durations) -> "PulseTimeline":
        """Copy with some durations changed; RF event times follow."""
        merged = self.durations()
        merged.update(durations)
        return build_timeline(
            self.scheme,
            merged,
            self.field,
            gravity=self.gravity,
            spin_coherence_time=self.spin_coherence_time,
            pulse_scale=self.pulse_scale,
            mass=self.mass,
        )


def _coerce_durations(durations) -> dict[str, float]:
    if isinstance(durations, Mapping):
        unknown = set(durations) - set(_DURATION_KEYS)
        if unknown:
            raise ConfigError(f"unknown duration keys: {sorted(unknown)}")
        out = {k: float(durations.get(k, 0.0)) for k in _DURATION_KEYS}
    elif isinstance(durations, Sequence) and len(durations) in (4, 6, 7):
        out = dict.fromkeys(_DURATION_KEYS, 0.0)
        for k, v in zip(("T1", "T2", "T3", "T4", "Td1", "Td2", "Td0"), durations):
            out[k] = float(v)
    else:
        raise ConfigError("durations must be a mapping or a sequence (T1, T2, T3, T4[, Td1, Td2[, Td0]])")
    for k, v in out.items():
        if not math.isfinite(v) or v < 0:
            raise ConfigError(f"duration {k} must be non-negative, got {v!r}")
    return out


def build_timeline(
    scheme,
    durations,
    field: FieldModel | None,
    *,
    gravity: bool = True,
    spin_coherence_time: float | None = None,
    pulse_scale=(1.0, 1.0, 1.0, 1.0),
    mass: float = M_RB87,
) -> PulseTimeline:
    """Timeline for ``scheme``; HalfLoop forces T3 = T4 = 0, SingleKick T2 = T3 = T4 = 0."""
    scheme = Scheme(scheme)
    d = _coerce_durations(durations)
    if scheme is Scheme.HALF_LOOP:
        d["T3"] = d["T4"] = d["Td2"] = 0.0
    elif scheme is Scheme.SINGLE_KICK:
        d["T2"] = d["T3"] = d["T4"] = d["Td2"] = 0.0
    if spin_coherence_time is not None and spin_coherence_time <= 0:
        raise ConfigError("spin coherence time must be positive")
    if len(pulse_scale) != 4:
        raise ConfigError("pulse_scale needs one factor per gradient pulse")

    bounds = np.concatenate([[0.0], np.cumsum([d[name] for name, _ in _SEGMENTS])])
    events = [RfEvent(0.0, np.pi / 2)]
    events += [RfEvent(float(bounds[k]), np.pi) for k in _PI_AFTER[scheme]]
    return PulseTimeline(
        scheme=scheme,
        T1=d["T1"],
        T2=d["T2"],
        T3=d["T3"],
        T4=d["T4"],
        Td1=d["Td1"],
        Td2=d["Td2"],
        Td0=d["Td0"],
        field=field,
        rf_events=tuple(events),
        gradient_sign_per_pulse=_SIGNS[scheme],
        pulse_scale=tuple(float(s) for s in pulse_scale),
        gravity=gravity,
        spin_coherence_time=spin_coherence_time,
        mass=mass,
    )


# --- overlap and contrast ----------------------------------------------------


def _log_overlap(y1, y2):
    """log <core1|core2> plus the log coherence factor of the excess spread.

    Rows of y1, y2 follow the packed layout of the propagation engine. For
    mixed packets the centroid spread is averaged over the two branches; the
    result is exact when both branches share the same covariance map.
    """
    z1, p1, vz1, cz1, vp1, th1 = y1
    z2, p2, vz2, cz2, vp2, th2 = y2
    s1 = 0.5 * HBAR / np.sqrt(np.maximum(vz1 * vp1 - cz1 * cz1, (0.5 * HBAR) ** 2))
    s2 = 0.5 * HBAR / np.sqrt(np.maximum(vz2 * vp2 - cz2 * cz2, (0.5 * HBAR) ** 2))
    v1 = vz1 * s1
    v2 = vz2 * s2
    A1 = 1.0 / (4.0 * v1) - 1j * cz1 / (2.0 * HBAR * vz1)
    A2 = 1.0 / (4.0 * v2) - 1j * cz2 / (2.0 * HBAR * vz2)
    dz = z2 - z1
    dp = p2 - p1
    a = np.conj(A1) + A2
    b = 2.0 * A2 * dz + 1j * dp / HBAR
    c0 = -A2 * dz * dz - 1j * p2 * dz / HBAR
    log_norm = -0.25 * np.log(2.0 * np.pi * v1) - 0.25 * np.log(2.0 * np.pi * v2)
    log_k = log_norm + 0.5 * np.log(np.pi / a) + b * b / (4.0 * a) + c0 + 1j * (th2 - th1)

    ex_vz = 0.5 * (vz1 * (1 - s1) + vz2 * (1 - s2))
    ex_cz = 0.5 * (cz1 * (1 - s1) + cz2 * (1 - s2))
    ex_vp = 0.5 * (vp1 * (1 - s1) + vp2 * (1 - s2))
    log_k = log_k - (dz * dz * ex_vp - 2.0 * dz * dp * ex_cz + dp * dp * ex_vz) / (2.0 * HBAR**2)
    return log_k


def gaussian_overlap(s1: GaussianState, s2: GaussianState) -> tuple[float, float]:
    """Magnitude and phase of <psi1|psi2> for general Gaussian packets.

    Unequal widths and chirps are supported. For mixed packets the magnitude
    also includes the loss of coherence from the incoherent centroid spread.
    """
    log_k = _log_overlap(_pack([s1])[:, 0], _pack([s2])[:, 0])
    return float(min(1.0, np.exp(log_k.real))), float(np.angle(np.exp(1j * log_k.imag)))


def hd_contrast(dz, dp, sigma_z, sigma_p):
    """exp[-(dz/sigma_z)^2/8 - (dp/sigma_p)^2/8]."""
    if np.any(np.asarray(sigma_z) <= 0) or np.any(np.asarray(sigma_p) <= 0):
        raise ValueError("widths must be positive")
    return np.exp(-((np.asarray(dz) / sigma_z) ** 2) / 8.0 - (np.asarray(dp) / sigma_p) ** 2 / 8.0)


def phenomenological_contrast(dz, dp, scales):
    """exp[-(dz/l_z)^2/2 - (dp/l_p)^2/2]."""
    return np.exp(-0.5 * (np.asarray(dz) / scales.l_z) ** 2 - 0.5 * (np.asarray(dp) / scales.l_p) ** 2)


def linear_phase_spread(force: float, T1: float, sigma_z: float) -> float:
    """Phase difference across one packet width imprinted by a kick F*T1."""
    return abs(force) * T1 * sigma_z / HBAR


# --- propagation of timelines -----------------------------------------------


@dataclass
class _Batch:
    times: np.ndarray  # (K, N)
    ys: list  # K arrays of shape (6, 2N)
    labels: list  # K tuples (label of branch 1, label of branch 2)
    amps: np.ndarray  # (2,) final spin amplitudes of the two branches
    initial: np.ndarray  # (6,) packed state at t = 0


def _moment_acceleration(model, moment, mass):
    """Acceleration per unit sign of a spin with moment ``moment`` (linear fields only)."""
    if isinstance(model, CalibratedAcceleration):
        return model.spin_acceleration(moment)
    return moment * MU_B * model.gradient / mass


def _check_batch(timelines):
    t0 = timelines[0]
    for t in timelines[1:]:
        if t.scheme != t0.scheme or t.field != t0.field or t.gravity != t0.gravity or t.mass != t0.mass:
            raise ConfigError("batched timelines must share scheme, field, gravity and mass")
        if t.Td0 != t0.Td0:
            raise ConfigError("batched timelines must share the release delay")


def _evolve(timelines, initial: GaussianState, initial_spin: SpinState, samples_per_segment=1, richardson=True):
    """Propagate both branches of every timeline; columns are [branch1..., branch2...]."""
    _check_batch(timelines)
    t0 = timelines[0]
    n = len(timelines)
    mass = t0.mass

    # pre-sequence fall, identical for both branches
    y0 = _pack([initial])
    if t0.Td0 > 0:
        y0 = advance(y0, Potential(None, [0.0], 0.0, mass, t0.gravity), t0.Td0)
    y = np.repeat(y0, 2 * n, axis=1)

    opening = t0.rf_events[0]
    amps = rotation_matrix(opening.rotation_angle, opening.phase) @ initial_spin.vector
    labels = [1, 2]
    amps = np.array([amps[0], amps[1]], dtype=complex)
    pi_after = _PI_AFTER[t0.scheme]
    pi_events = iter(t0.rf_events[1:])

    def apply_pi():
        ev = next(pi_events)
        R = rotation_matrix(ev.rotation_angle, ev.phase)
        for b in range(2):
            old = labels[b]
            new = 3 - old
            amps[b] = amps[b] * R[new - 1, old - 1]
            labels[b] = new

    seg_dur = np.array([t.segment_durations() for t in timelines])  # (N, 6)
    signs = np.array([t.gradient_sign_per_pulse for t in timelines], dtype=float)
    scales = np.array([t.pulse_scale for t in timelines], dtype=float)

    clock = np.zeros(n)
    times = [clock.copy()]
    ys = [y.copy()]
    snap_labels = [tuple(labels)]
    if 0 in pi_after:
        apply_pi()
        snap_labels[-1] = tuple(labels)
    for k, (_, pulse) in enumerate(_SEGMENTS):
        dur = seg_dur[:, k]
        if pulse is None or t0.field is None:
            pot = Potential(None, np.zeros(2 * n), 0.0, mass, t0.gravity)
        else:
            factor = np.tile(signs[:, pulse] * scales[:, pulse], 2)
            moments = np.concatenate([np.full(n, _LABEL_MOMENT[labels[0]]), np.full(n, _LABEL_MOMENT[labels[1]])])
            pot = Potential(t0.field, moments, factor, mass, t0.gravity)
        if np.any(dur > 0):
            sub = np.tile(dur, 2) / samples_per_segment
            for _ in range(samples_per_segment):
                y = advance(y, pot, sub, richardson=richardson)
                clock = clock + dur / samples_per_segment
                times.append(clock.copy())
                ys.append(y.copy())
                snap_labels.append(tuple(labels))
        if k + 1 in pi_after:
            apply_pi()
            snap_labels[-1] = tuple(labels)
    return _Batch(np.array(times), ys, snap_labels, amps, y0[:, 0])


def _readout(log_k, labels, amps, envelope):
    """Visibility and phase Phi with P1(phi) = 1/2 + V/2 sin(phi + Phi)."""
    K = np.exp(log_k) * envelope

    def p1(phi):
        R = rotation_matrix(np.pi / 2, phi)
        d1 = R[0, labels[0] - 1] * amps[0]
        d2 = R[0, labels[1] - 1] * amps[1]
        return abs(d1) ** 2 + abs(d2) ** 2 + 2.0 * np.real(np.conj(d1) * d2 * K)

    x = p1(0.0) - 0.5
    yv = p1(np.pi / 2) - 0.5
    visibility = 2.0 * np.hypot(x, yv)
    return np.minimum(visibility, 1.0), np.arctan2(x, yv)


def _envelope(timeline):
    if timeline.spin_coherence_time is None:
        return 1.0
    return math.exp(-timeline.total_time / timeline.spin_coherence_time)


@dataclass(frozen=True)
class RunRecord:
    times: np.ndarray
    branch1: tuple[GaussianState, ...]
    branch2: tuple[GaussianState, ...]
    delta_z: np.ndarray
    delta_p: np.ndarray
    rel_phase: np.ndarray
    contrast: np.ndarray
    final_contrast: float
    final_phase: float
    timeline: PulseTimeline = field(repr=False)
    initial: GaussianState = field(repr=False)
    final_labels: tuple[int, int] = (1, 2)


def _records(batch: _Batch, timelines) -> list[RunRecord]:
    n = len(timelines)
    records = []
    for j, tl in enumerate(timelines):
        b1 = np.array([y[:, j] for y in batch.ys]).T
        b2 = np.array([y[:, n + j] for y in batch.ys]).T
        log_k = _log_overlap(b1, b2)
        env = _envelope(tl)
        vis, phase = _readout(log_k[-1], batch.labels[-1], batch.amps, env)
        records.append(
            RunRecord(
                times=batch.times[:, j].copy(),
                branch1=tuple(_unpack(b1)),
                branch2=tuple(_unpack(b2)),
                delta_z=b2[0] - b1[0],
                delta_p=b2[1] - b1[1],
                rel_phase=log_k.imag,
                contrast=np.minimum(np.exp(log_k.real), 1.0),
                final_contrast=float(vis),
                final_phase=float(phase),
                timeline=tl,
                initial=_unpack(batch.initial[:, None])[0],
                final_labels=batch.labels[-1],
            )
        )
    return records


def run(
    timeline: PulseTimeline,
    initial: GaussianState,
    initial_spin: SpinState | None = None,
    *,
    samples_per_segment: int = 1,
) -> RunRecord:
    """Propagate both spin branches through ``timeline``.

    Samples are taken at every segment boundary (more with
    ``samples_per_segment``). ``initial`` is the state at release; the
    timeline's Td0 free fall is applied before the opening pi/2 pulse.
    """
    if samples_per_segment < 1:
        raise ConfigError("samples_per_segment must be at least 1")
    spin = SpinState.ket2() if initial_spin is None else initial_spin
    batch = _evolve([timeline], initial, spin, samples_per_segment)
    return _records(batch, [timeline])[0]


def run_batch(
    timelines: Sequence[PulseTimeline],
    initial: GaussianState,
    initial_spin: SpinState | None = None,
    *,
    richardson: bool = True,
) -> dict[str, np.ndarray]:
    """Final observables of many timelines sharing scheme and field, vectorized.

    Returns arrays ``dz``, ``dp``, ``contrast`` (visibility), ``phase``
    (readout phase Phi) and ``overlap`` (|<psi1|psi2>| without envelope).
    """
    spin = SpinState.ket2() if initial_spin is None else initial_spin
    batch = _evolve(list(timelines), initial, spin, richardson=richardson)
    n = len(timelines)
    y = batch.ys[-1]
    log_k = _log_overlap(y[:, :n], y[:, n:])
    env = np.array([_envelope(t) for t in timelines])
    vis, phase = _readout(log_k, batch.labels[-1], batch.amps, env)
    return {
        "dz": y[0, n:] - y[0, :n],
        "dp": y[1, n:] - y[1, :n],
        "contrast": np.asarray(vis),
        "phase": np.asarray(phase),
        "overlap": np.minimum(np.exp(log_k.real), 1.0),
        "log_overlap": log_k.real,
    }


def max_separation(record: RunRecord) -> tuple[float, float]:
    if len(record.times) == 0:
        raise ValueError("empty record")
    return float(np.max(np.abs(record.delta_z))), float(np.max(np.abs(record.delta_p)))


# --- closed-form phase ------------------------------------------------------


@dataclass(frozen=True)
class PhasePolynomial:
    """Interferometer phase as a polynomial in the delay ``Td``.

    ``delay`` names which delays vary: "Td1", "Td2" or "both" (Td1 = Td2 = Td).
    """

    coefficients: np.ndarray
    delay: str

    def __call__(self, Td):
        return Polynomial(self.coefficients)(Td)

    def coefficient(self, power: int) -> float:
        return float(self.coefficients[power]) if power < len(self.coefficients) else 0.0


def relative_phase(record: RunRecord, delay: str | None = None) -> PhasePolynomial:
    """Closed-form spatial phase arg<psi1|psi2> at the end of the sequence.

    For piecewise-constant forces each branch's action is a polynomial in
    the segment durations. With equal covariances the overlap phase is
    (S2 - S1)/hbar - (p1 + p2)(z2 - z1)/(2 hbar). Delays are treated as
    polynomial variables so the result gives every power of Td.
    """
    tl = record.timeline
    model = tl.field
    if model is not None and not (
        isinstance(model, CalibratedAcceleration) or (isinstance(model, UniformGradient) and model.curvature == 0)
    ):
        raise ConfigError("closed-form phase needs a uniform gradient or a calibrated acceleration")
    if delay is None:
        delay = "both" if tl.scheme.is_full_loop else "Td1"
    if delay not in ("Td1", "Td2", "both"):
        raise ConfigError(f"unknown delay selector {delay!r}")

    m = tl.mass
    g = G_GRAVITY if tl.gravity else 0.0
    td = Polynomial([0.0, 1.0])
    var = {"Td1": delay in ("Td1", "both"), "Td2": delay in ("Td2", "both")}
    z0, p0 = record.initial.z, record.initial.p
    state = [[Polynomial([z0]), Polynomial([p0 / m]), Polynomial([0.0])] for _ in range(2)]
    labels = [1, 2]
    pi_after = _PI_AFTER[tl.scheme]
    if 0 in pi_after:
        labels.reverse()
    for k, (name, pulse) in enumerate(_SEGMENTS):
        tau = td if var.get(name, False) else Polynomial([getattr(tl, name)])
        for b in range(2):
            z, v, S = state[b]
            acc = -g
            if pulse is not None and model is not None:
                acc += tl.gradient_sign_per_pulse[pulse] * tl.pulse_scale[pulse] * _moment_acceleration(
                    model, _LABEL_MOMENT[labels[b]], m
                )
            S = S + 0.5 * m * v * v * tau + m * acc * z * tau + m * v * acc * tau**2 + m * acc**2 * tau**3 / 3.0
            z = z + v * tau + 0.5 * acc * tau**2
            v = v + acc * tau
            state[b] = [z, v, S]
        if k + 1 in pi_after:
            labels.reverse()
    (z1, v1, S1), (z2, v2, S2) = state
    phase = (S2 - S1) / HBAR - m * (v1 + v2) * (z2 - z1) / (2.0 * HBAR)
    coef = phase.trim(tol=0).coef
    return PhasePolynomial(np.asarray(coef, dtype=float), delay)


# --- scans --------------------------------------------------------------------


def fringe_scan(timeline: PulseTimeline, initial: GaussianState, phi_grid, initial_spin=None) -> np.ndarray:
    """Rows (phi, P1) of the fringe obtained by scanning the readout phase."""
    phi = np.asarray(phi_grid, dtype=float)
    if phi.size == 0:
        raise ValueError("empty phase grid")
    rec = run(timeline, initial, initial_spin)
    return np.column_stack([phi, ramsey_population(rec.final_phase, rec.final_contrast, phi)])


def delay_scan(timeline: PulseTimeline, initial: GaussianState, Td_values, delay: str | None = None):
    """Final observables versus delay; full loops vary Td1 = Td2 by default."""
    if delay is None:
        delay = "both" if timeline.scheme.is_full_loop else "Td1"
    keys = {"Td1": ("Td1",), "Td2": ("Td2",), "both": ("Td1", "Td2")}[delay]
    tls = [timeline.with_durations(**{k: float(t) for k in keys}) for t in Td_values]
    return run_batch(tls, initial)


@dataclass(frozen=True)
class Jitter:
    current_rel_sigma: float = 0.0
    timing_sigma: float = 0.0

    def __post_init__(self):
        if self.current_rel_sigma < 0 or self.timing_sigma < 0:
            raise ValueError("jitter widths must be non-negative")


def default_initial_state() -> GaussianState:
    """Released condensate of 10^4 atoms from a (40, 40, 126) Hz trap."""
    two_pi = 2.0 * np.pi
    return released_state(CondensateParams(1e4, two_pi * 40.0, two_pi * 40.0, two_pi * 126.0))


def jitter_monte_carlo(
    timeline: PulseTimeline,
    jitter: Jitter,
    n_shots: int,
    seed: int,
    initial: GaussianState | None = None,
) -> tuple[float, float]:
    """Shot-to-shot phase spread and contrast of the shot-averaged fringe.

    Each shot multiplies every pulse amplitude by 1 + N(0, current_rel_sigma)
    and adds N(0, timing_sigma) to each nonzero duration (clipped at zero).
    """
    if n_shots < 2:
        raise ValueError("need at least two shots")
    if initial is None:
        initial = default_initial_state()
    rng = np.random.default_rng(seed)
    nominal = timeline.durations()
    tls = []
    for _ in range(n_shots):
        scale = tuple(s * (1.0 + jitter.current_rel_sigma * rng.standard_normal()) for s in timeline.pulse_scale)
        d = dict(nominal)
        for key in ("T1", "T2", "T3", "T4", "Td1", "Td2"):
            if d[key] > 0:
                d[key] = max(0.0, d[key] + jitter.timing_sigma * rng.standard_normal())
        tls.append(replace(timeline.with_durations(**d), pulse_scale=scale))
    out = run_batch(tls, initial)
    ref = run_batch([timeline], initial)["phase"][0]
    dev = np.angle(np.exp(1j * (out["phase"] - ref)))
    phase_std = float(np.std(dev, ddof=1))
    mean_contrast = float(abs(np.mean(out["contrast"] * np.exp(1j * out["phase"]))))
    return phase_std, mean_contrast
