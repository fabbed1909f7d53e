"""Stern-Gerlach interferometry with a levitated nanodiamond: order-of-magnitude budget.

A diamond of ``n_atoms`` carbon atoms carrying one NV spin is split by a
wire gradient. The report collects the acceleration, the maximal splitting
a (T/4)^2 for a list of total times, the ground-state coherence length of
the released particle and how much better than the atomic demonstration the
recombination would have to be.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import DIAMOND_DENSITY, HBAR, M_C12, MU_B
from .magnetics import FieldModel, RectWire, ThinWire, field_and_derivatives

# Recombination accuracy demonstrated with atoms (coherence length ~700 nm there).
ATOMIC_RECOMBINATION_ACCURACY = 100e-9
# Current density (A/m^2) above which a warning is emitted, 1e8 A/cm^2.
CURRENT_DENSITY_LIMIT = 1e12


@dataclass(frozen=True)
class MacroObjectSpec:
    n_atoms: float = 1e6
    atom_mass: float = M_C12
    density: float = DIAMOND_DENSITY
    spin_moment: float = 2.0  # in Bohr magnetons
    trap_omega: float = 2.0 * math.pi * 80e3
    spin_coherence_time: float = 0.6

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be at least 1")
        for name in ("atom_mass", "density", "trap_omega", "spin_coherence_time"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.spin_moment < 0:
            raise ValueError("spin_moment must be non-negative")

    @property
    def total_mass(self) -> float:
        return self.n_atoms * self.atom_mass


@dataclass(frozen=True)
class FeasibilityReport:
    total_mass: float
    radius: float
    gradient: float
    acceleration: float
    splittings: tuple[tuple[float, float], ...]
    coherence_length: float
    recombination_budget: float
    within_spin_coherence: tuple[bool, ...]

    def as_dict(self) -> dict:
        return {
            "total_mass_kg": self.total_mass,
            "radius_m": self.radius,
            "gradient_T_per_m": self.gradient,
            "acceleration_m_per_s2": self.acceleration,
            "splittings": [{"T_s": T, "dz_m": dz} for T, dz in self.splittings],
            "coherence_length_m": self.coherence_length,
            "recombination_budget": self.recombination_budget,
            "within_spin_coherence": list(self.within_spin_coherence),
        }

    def table(self) -> str:
        lines = [
            f"mass                  {self.total_mass:.4g} kg",
            f"radius                {self.radius:.4g} m",
            f"gradient              {self.gradient:.4g} T/m",
            f"acceleration          {self.acceleration:.4g} m/s^2",
            f"coherence length      {self.coherence_length:.4g} m",
            f"recombination budget  {self.recombination_budget:.4g}",
            "T (s)        dz (m)       within spin coherence",
        ]
        for (T, dz), ok in zip(self.splittings, self.within_spin_coherence):
            lines.append(f"{T:<12.4g} {dz:<12.4g} {'yes' if ok else 'no'}")
        return "\n".join(lines)


def object_radius(spec: MacroObjectSpec) -> float:
    """Radius of a sphere of the object's mass at its density."""
    return (3.0 * spec.total_mass / (4.0 * math.pi * spec.density)) ** (1.0 / 3.0)


def nv_acceleration(spec: MacroObjectSpec, gradient: float) -> float:
    """spin_moment mu_B gradient / total mass."""
    if gradient < 0:
        raise ValueError("gradient magnitude must be non-negative")
    return spec.spin_moment * MU_B * gradient / spec.total_mass


def splitting_table(a: float, T_list) -> tuple[tuple[float, float], ...]:
    """Maximal splitting a (T/4)^2 for each total time T."""
    if a < 0:
        raise ValueError("acceleration must be non-negative")
    return tuple((float(T), a * (float(T) / 4.0) ** 2) for T in T_list)


def ground_state_coherence_length(spec: MacroObjectSpec) -> float:
    """Oscillator length sqrt(hbar / (m omega))."""
    return math.sqrt(HBAR / (spec.total_mass * spec.trap_omega))


def _wire_current_density(wire: FieldModel) -> float | None:
    if isinstance(wire, RectWire):
        return abs(wire.current_density)
    return None


def wire_evaluation_point(wire: FieldModel, distance: float) -> float:
    """Height ``distance`` below the wire: below the bottom surface for a rectangular wire."""
    if isinstance(wire, RectWire):
        return wire.wire_center - 0.5 * wire.height - distance
    if isinstance(wire, ThinWire):
        return wire.wire_position - distance
    return -distance


def feasibility_report(spec: MacroObjectSpec, wire: FieldModel, distance: float, T_list) -> FeasibilityReport:
    """Assemble the budget for ``spec`` placed ``distance`` from ``wire``.

    The recombination budget is the recombination accuracy reached with atoms
    (100 nm) divided by the object's coherence length: the factor by which
    the recombination has to improve before the object's contrast survives.
    """
    if distance <= 0:
        raise ValueError("distance must be positive")
    T = np.asarray(T_list, dtype=float)
    if np.any(T < 0) or np.any(np.diff(T) <= 0):
        raise ValueError("T_list must be non-negative and strictly increasing")
    jc = _wire_current_density(wire)
    if jc is not None and jc > CURRENT_DENSITY_LIMIT:
        warnings.warn(
            f"wire current density {jc * 1e-4:.3g} A/cm^2 exceeds 1e8 A/cm^2",
            RuntimeWarning,
            stacklevel=2,
        )
    _, dB, _ = field_and_derivatives(wire, wire_evaluation_point(wire, distance))
    gradient = abs(float(dB))
    a = nv_acceleration(spec, gradient)
    coh = ground_state_coherence_length(spec)
    return FeasibilityReport(
        total_mass=spec.total_mass,
        radius=object_radius(spec),
        gradient=gradient,
        acceleration=a,
        splittings=splitting_table(a, T),
        coherence_length=coh,
        recombination_budget=ATOMIC_RECOMBINATION_ACCURACY / coh,
        within_spin_coherence=tuple(bool(t < spec.spin_coherence_time) for t in T),
    )
