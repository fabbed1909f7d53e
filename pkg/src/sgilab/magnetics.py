"""Magnetic field sources along the vertical axis and the forces they exert.

The field returned by every model is the component along the bias
(quantization) axis contributed by the chip, with the homogeneous bias itself
removed: the RF drive is resonant with the bias splitting, so only the
position dependent part enters the motion and the interferometer phase.
All models evaluate on numpy arrays as well as scalars.

The vertical coordinate is ``z``; wires sit at height ``z_w`` and may be
offset sideways by ``y`` in the chip plane. A filament carrying current ``I``
contributes ``mu0 I (z_w - z) / (2 pi rho^2)`` along the bias axis, where
``rho^2 = y^2 + (z_w - z)^2``; directly below the wire this is the familiar
``mu0 I / (2 pi r)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .constants import BIAS_FIELD_DEFAULT, GF_RB87_F2, MU_0, MU_B
from .errors import FieldDomainError

_KERNEL = MU_0 / (2.0 * np.pi)


class FieldModel:
    """Base class; subclasses implement ``field`` returning (B, dB/dz, d2B/dz2)."""

    bias_field: float

    def field(self, z):
        raise NotImplementedError

    def scaled(self, factor: float) -> "FieldModel":
        """Same geometry with all currents (or gradients) multiplied by ``factor``."""
        raise NotImplementedError

    @property
    def is_quadratic(self) -> bool:
        """True when the potential is exactly at most quadratic in z."""
        return False


@dataclass(frozen=True)
class UniformGradient(FieldModel):
    """B(z) = gradient * z + curvature * z**2 / 2."""

    gradient: float
    curvature: float = 0.0
    bias_field: float = BIAS_FIELD_DEFAULT

    def field(self, z):
        z = np.asarray(z, dtype=float)
        B = self.gradient * z + 0.5 * self.curvature * z * z
        dB = self.gradient + self.curvature * z
        d2B = np.full_like(z, self.curvature)
        return B, dB, d2B

    def scaled(self, factor):
        return replace(self, gradient=self.gradient * factor, curvature=self.curvature * factor)

    @property
    def is_quadratic(self):
        return True


def _filament(current, z_w, y, z):
    u = z_w - z
    rho2 = y * y + u * u
    if np.any(rho2 == 0.0):
        raise FieldDomainError("field evaluated on a thin wire")
    B = _KERNEL * current * u / rho2
    dB = -_KERNEL * current * (y * y - u * u) / rho2**2
    d2B = _KERNEL * current * 2.0 * u * (u * u - 3.0 * y * y) / rho2**3
    return B, dB, d2B


@dataclass(frozen=True)
class ThinWire(FieldModel):
    current: float
    wire_position: float
    lateral_offset: float = 0.0
    bias_field: float = BIAS_FIELD_DEFAULT

    def field(self, z):
        z = np.asarray(z, dtype=float)
        return _filament(self.current, self.wire_position, self.lateral_offset, z)

    def scaled(self, factor):
        return replace(self, current=self.current * factor)


@lru_cache(maxsize=8)
def _gauss_legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


@dataclass(frozen=True)
class RectWire(FieldModel):
    """Wire of rectangular cross-section ``width`` x ``height`` with uniform current.

    The filament kernel is integrated over the cross-section with a fixed
    ``order`` x ``order`` Gauss-Legendre rule.
    """

    current: float
    width: float
    height: float
    wire_center: float
    lateral_offset: float = 0.0
    bias_field: float = BIAS_FIELD_DEFAULT
    order: int = 16

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("wire cross-section must have positive width and height")

    def field(self, z):
        z = np.asarray(z, dtype=float)
        inside = np.abs(z - self.wire_center) < 0.5 * self.height
        if abs(self.lateral_offset) < 0.5 * self.width and np.any(inside):
            raise FieldDomainError("field evaluated inside the wire cross-section")
        nodes, weights = _gauss_legendre(self.order)
        ys = self.lateral_offset + 0.5 * self.width * nodes
        zs = self.wire_center + 0.5 * self.height * nodes
        w2 = np.outer(weights, weights).ravel() * 0.25  # weights of the unit square
        yy, zz = np.meshgrid(ys, zs, indexing="ij")
        yy = yy.ravel()
        zz = zz.ravel()
        zb = z[..., None]
        B, dB, d2B = _filament(self.current, zz, yy, zb)
        return (B * w2).sum(-1), (dB * w2).sum(-1), (d2B * w2).sum(-1)

    def scaled(self, factor):
        return replace(self, current=self.current * factor)

    @property
    def current_density(self) -> float:
        return self.current / (self.width * self.height)


@dataclass(frozen=True)
class ThreeWireQuadrupole(FieldModel):
    """Three parallel thin wires; ``positions`` holds (lateral offset, height) pairs."""

    currents: tuple[float, float, float]
    positions: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    bias_field: float = BIAS_FIELD_DEFAULT

    def __post_init__(self):
        if len(self.currents) != 3 or len(self.positions) != 3:
            raise ValueError("a three-wire configuration needs three currents and positions")

    @property
    def wires(self) -> list[ThinWire]:
        return [
            ThinWire(current=I, wire_position=zw, lateral_offset=y, bias_field=self.bias_field)
            for I, (y, zw) in zip(self.currents, self.positions)
        ]

    def field(self, z):
        parts = [w.field(z) for w in self.wires]
        return tuple(sum(p[k] for p in parts) for k in range(3))

    def scaled(self, factor):
        return replace(self, currents=tuple(I * factor for I in self.currents))


@dataclass(frozen=True)
class CalibratedAcceleration(FieldModel):
    """A measured relative acceleration, no geometry.

    ``acceleration`` is the relative acceleration of a spin pair whose
    magnetic moments differ by ``reference_moment`` (in units of mF*gF). The
    default 0.5 is the |2,2> / |2,1> pair of 87Rb.
    """

    acceleration: float
    reference_moment: float = GF_RB87_F2
    bias_field: float = BIAS_FIELD_DEFAULT

    def field(self, z):
        raise FieldDomainError("a calibrated-acceleration model has no field geometry")

    def scaled(self, factor):
        return replace(self, acceleration=self.acceleration * factor)

    def spin_acceleration(self, moment: float) -> float:
        return self.acceleration * moment / self.reference_moment

    @property
    def is_quadratic(self):
        return True


def field_and_derivatives(model: FieldModel, z):
    """Chip field along the bias axis at ``z`` and its first two z-derivatives."""
    return model.field(z)


def spin_acceleration(model: FieldModel, z, mF: int, gF: float, mass: float):
    """Acceleration mF gF mu_B dB/dz / mass of a spin state.

    Sign convention: the potential is U = -mF gF mu_B B, so states with
    mF gF > 0 are pushed toward increasing B.
    """
    if isinstance(model, CalibratedAcceleration):
        return model.spin_acceleration(mF * gF) + 0.0 * np.asarray(z, dtype=float)
    _, dB, _ = model.field(z)
    return mF * gF * MU_B * dB / mass


def differential_acceleration(model: FieldModel, z, state_pair, mass: float):
    """Acceleration of ``state_pair[0]`` minus that of ``state_pair[1]``.

    Each entry of ``state_pair`` is (mF, gF); for ((2, 1/2), (1, 1/2)) the
    result is one unit of gF mu_B dB/dz / m.
    """
    (m1, g1), (m2, g2) = state_pair
    if (m1, g1) == (m2, g2):
        raise ValueError("differential acceleration needs two distinct spin states")
    return spin_acceleration(model, z, m1, g1, mass) - spin_acceleration(model, z, m2, g2, mass)


def gradient_for_acceleration(relative_acceleration: float, mass: float, delta_moment: float = GF_RB87_F2) -> float:
    """Field gradient producing ``relative_acceleration`` between moments differing by ``delta_moment``."""
    return relative_acceleration * mass / (delta_moment * MU_B)


def thin_wire_current_for_gradient(gradient: float, distance: float) -> float:
    """Current of a thin wire whose gradient at ``distance`` equals ``gradient``."""
    return gradient * 2.0 * np.pi * distance**2 / MU_0
