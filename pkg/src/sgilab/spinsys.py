"""Two-level spin physics for the |2,1> / |2,2> pair of 87Rb.

Energies come from the Breit-Rabi formula; RF pulses are ideal instantaneous
rotations about an equatorial axis of the Bloch sphere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import GI_RB87, GJ_RB87, H, HFS_RB87, I_RB87, MU_B

NORM_TOL = 1e-12


@dataclass(frozen=True)
class SpinState:
    """Amplitudes of |1> = |F=2, mF=1> and |2> = |F=2, mF=2>."""

    amp1: complex
    amp2: complex

    def __post_init__(self) -> None:
        norm = abs(self.amp1) ** 2 + abs(self.amp2) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"spin state not normalized (|a1|^2+|a2|^2 = {norm!r})")

    @classmethod
    def ket1(cls) -> "SpinState":
        return cls(1.0 + 0j, 0j)

    @classmethod
    def ket2(cls) -> "SpinState":
        return cls(0j, 1.0 + 0j)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp1, self.amp2], dtype=complex)

    @property
    def populations(self) -> tuple[float, float]:
        return abs(self.amp1) ** 2, abs(self.amp2) ** 2


@dataclass(frozen=True)
class RfEvent:
    """An RF pulse, treated as instantaneous at ``time``.

    ``duration`` is kept for bookkeeping only (10 us in the experiment).
    """

    time: float
    rotation_angle: float
    phase: float = 0.0
    duration: float = 10e-6

    def __post_init__(self) -> None:
        if self.duration < 0:
            raise ValueError("RF pulse duration must be non-negative")
        if not 0.0 < self.rotation_angle < 2.0 * np.pi:
            raise ValueError("RF rotation angle must lie in (0, 2*pi)")

    @property
    def is_pi(self) -> bool:
        return abs(self.rotation_angle - np.pi) < 1e-12


def rotation_matrix(angle: float, phase: float) -> np.ndarray:
    """SU(2) rotation by ``angle`` about the axis (cos phase, sin phase, 0)."""
    c = np.cos(angle / 2.0)
    s = np.sin(angle / 2.0)
    return np.array(
        [[c, -1j * np.exp(-1j * phase) * s], [-1j * np.exp(1j * phase) * s, c]],
        dtype=complex,
    )


def rf_rotate(state: SpinState, angle: float, phase: float) -> SpinState:
    a1, a2 = rotation_matrix(angle, phase) @ state.vector
    norm = np.sqrt(abs(a1) ** 2 + abs(a2) ** 2)
    # renormalize away the last-bit drift of long compositions
    return SpinState(complex(a1 / norm), complex(a2 / norm))


def breit_rabi_energy(B: float, F: int, mF: int) -> float:
    """Ground-state energy (J) of 87Rb |F, mF> in a field ``B`` (T).

    Uses Steck's form of the Breit-Rabi formula. The stretched state
    mF = +-(I + 1/2) of the upper manifold is evaluated from its linear closed
    form, which avoids picking the wrong branch of the square root once
    x > 1 for mF = -2.
    """
    if F not in (1, 2):
        raise ValueError(f"F must be 1 or 2 for the 87Rb ground state, got {F}")
    if abs(mF) > F:
        raise ValueError(f"|mF| must not exceed F (F={F}, mF={mF})")
    if B < 0:
        raise ValueError("field magnitude must be non-negative")

    dE = H * HFS_RB87
    I = I_RB87
    if F == 2 and abs(mF) == 2:
        sign = 1.0 if mF > 0 else -1.0
        return dE * I / (2 * I + 1) + sign * 0.5 * (GJ_RB87 + 2 * I * GI_RB87) * MU_B * B

    x = (GJ_RB87 - GI_RB87) * MU_B * B / dE
    branch = 1.0 if F == 2 else -1.0
    root = np.sqrt(1.0 + 4.0 * mF * x / (2 * I + 1) + x * x)
    return float(-dE / (2 * (2 * I + 1)) + GI_RB87 * MU_B * mF * B + branch * 0.5 * dE * root)


def transition_frequency(B: float, lower: tuple[int, int], upper: tuple[int, int]) -> float:
    """Frequency (Hz) of the transition lower -> upper, each given as (F, mF)."""
    return (breit_rabi_energy(B, *upper) - breit_rabi_energy(B, *lower)) / H


def ramsey_population(interferometer_phase: float, contrast: float, readout_phase) -> np.ndarray | float:
    """Population of |1> after the closing pi/2 pulse.

    P1 = 0.5 * contrast * sin(readout_phase + interferometer_phase) + 0.5
    """
    if not 0.0 <= contrast <= 1.0:
        raise ValueError("contrast must lie in [0, 1]")
    return 0.5 * contrast * np.sin(np.asarray(readout_phase) + interferometer_phase) + 0.5
