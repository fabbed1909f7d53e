"""Physical constants and unit conversions.

All quantities are SI. Fundamental constants come from ``scipy.constants``
(CODATA 2018); the 87Rb data follow D. A. Steck, "Rubidium 87 D Line Data"
(rev. 2.2.1), which is also the source for the hyperfine splitting and the
Lande factors. Other modules import from here and never hard-code values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = _sc.hbar
    h: float = _sc.h
    mu_B: float = _sc.physical_constants["Bohr magneton"][0]
    mu0: float = _sc.mu_0
    g_gravity: float = _sc.g  # standard gravity
    amu: float = _sc.atomic_mass
    m_Rb87: float = 86.909180527 * _sc.atomic_mass  # Steck table 1
    a_s_Rb87: float = 5.18e-9  # s-wave scattering length used for the condensate
    hfs_Rb87: float = 6.834682610904290e9  # ground-state hyperfine splitting, Hz
    gJ_Rb87: float = 2.00233113
    gI_Rb87: float = -0.0009951414  # Steck sign convention
    I_Rb87: float = 1.5
    diamond_density: float = 3510.0
    m_C12: float = 12.0 * _sc.atomic_mass
    lambda_D2: float = 780.241209686e-9

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if name == "gI_Rb87":
                continue
            if not value > 0:
                raise ValueError(f"constant {name} must be positive, got {value}")


CONSTANTS = PhysicalConstants()

HBAR = CONSTANTS.hbar
H = CONSTANTS.h
MU_B = CONSTANTS.mu_B
MU_0 = CONSTANTS.mu0
G_GRAVITY = CONSTANTS.g_gravity
AMU = CONSTANTS.amu
M_RB87 = CONSTANTS.m_Rb87
A_S_RB87 = CONSTANTS.a_s_Rb87
HFS_RB87 = CONSTANTS.hfs_Rb87
GJ_RB87 = CONSTANTS.gJ_Rb87
GI_RB87 = CONSTANTS.gI_Rb87
I_RB87 = CONSTANTS.I_Rb87
DIAMOND_DENSITY = CONSTANTS.diamond_density
M_C12 = CONSTANTS.m_C12
LAMBDA_D2 = CONSTANTS.lambda_D2

# Lande factor of the F=2 ground manifold, linear-Zeeman regime.
GF_RB87_F2 = 0.5

# Bias field of the experiment, sets the quantization axis.
BIAS_FIELD_DEFAULT = 36.7e-4

# unit helpers, multiply to convert into SI
US = 1e-6
MS = 1e-3
UM = 1e-6
NM = 1e-9
GAUSS = 1e-4
MM_PER_S = 1e-3
TWO_PI = 2.0 * np.pi


def photon_recoil_velocity(wavelength: float = LAMBDA_D2, mass: float = M_RB87) -> float:
    """Single-photon recoil velocity h / (lambda m)."""
    return H / (wavelength * mass)
