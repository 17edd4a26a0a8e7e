"""Physical constants and unit conversions.

Internal unit system used throughout the package:

* energy / frequency : wavenumbers (cm^-1), with hbar folded in so that a
  level splitting in cm^-1 *is* the transition frequency times HBAR,
* time               : femtoseconds,
* angle              : radians,
* dipole             : Debye,
* electric field     : cm^-1 per Debye (so dipole * field is an energy),
* moment of inertia  : amu * Angstrom^2.

All constants are CODATA-2018 (the SI defining constants are exact since the
2019 redefinition).
"""

from __future__ import annotations

import math

# --- defining constants (exact, SI) ------------------------------------------
SPEED_OF_LIGHT_CM_S = 2.99792458e10      # cm/s
PLANCK_J_S = 6.62607015e-34              # J s
BOLTZMANN_J_K = 1.380649e-23             # J/K

# --- measured constants (CODATA 2018) ----------------------------------------
ATOMIC_MASS_KG = 1.66053906660e-27       # kg

# --- derived ------------------------------------------------------------------
SPEED_OF_LIGHT_CM_FS = SPEED_OF_LIGHT_CM_S * 1e-15          # cm/fs
TWO_PI_C = 2.0 * math.pi * SPEED_OF_LIGHT_CM_FS             # rad/fs per cm^-1

#: hbar in cm^-1 * fs; equals 1/(2 pi c) with c in cm/fs.
HBAR = 1.0 / TWO_PI_C

#: Boltzmann constant in cm^-1 / K.
KB = BOLTZMANN_J_K / (PLANCK_J_S * SPEED_OF_LIGHT_CM_S)

HBAR_J_S = PLANCK_J_S / (2.0 * math.pi)
_HC_J_CM = PLANCK_J_S * SPEED_OF_LIGHT_CM_S                 # J per cm^-1

#: 1 Debye in C m (1e-21 / c with c in m/s).
DEBYE_C_M = 1e-21 / (SPEED_OF_LIGHT_CM_S * 1e-2)

#: energy (cm^-1) of a 1 Debye dipole in a 1 MV/m field.
DEBYE_MVM_TO_CM = DEBYE_C_M * 1e6 / _HC_J_CM

#: hbar^2 / 2 expressed in cm^-1 * (amu Angstrom^2); the kinetic prefactor for
#: a rotor of inertia m (amu Angstrom^2) is KINETIC_CM / m.
KINETIC_CM = HBAR_J_S**2 / (2.0 * ATOMIC_MASS_KG * 1e-20) / _HC_J_CM


class DimensionMismatchError(ValueError):
    """Raised when a conversion is requested across different dimensions."""


# unit tag -> (dimension, factor to the internal unit of that dimension)
_UNITS = {
    "cm-1": ("energy", 1.0),
    "rad/fs": ("energy", HBAR),              # hbar*omega in cm^-1
    "fs": ("time", 1.0),
    "ps": ("time", 1e3),
    "s": ("time", 1e15),
    "debye": ("dipole", 1.0),
    "MV/m": ("field", DEBYE_MVM_TO_CM),
    "cm-1/debye": ("field", 1.0),
    "amu*A^2": ("inertia", 1.0),
    "K": ("temperature", 1.0),
    "rad": ("angle", 1.0),
    "deg": ("angle", math.pi / 180.0),
}


def convert(value: float, from_unit: str, to_unit: str) -> float:
    """Convert ``value`` between two unit tags of the same dimension."""
    try:
        dim_a, fac_a = _UNITS[from_unit]
    except KeyError:
        raise DimensionMismatchError(f"unknown unit tag {from_unit!r}") from None
    try:
        dim_b, fac_b = _UNITS[to_unit]
    except KeyError:
        raise DimensionMismatchError(f"unknown unit tag {to_unit!r}") from None
    if dim_a != dim_b:
        raise DimensionMismatchError(
            f"cannot convert {from_unit!r} ({dim_a}) to {to_unit!r} ({dim_b})"
        )
    return value * (fac_a / fac_b)


def thermal_energy(temperature_k: float) -> float:
    """k_B * T in cm^-1."""
    return KB * temperature_k


def bose_occupation(energy_cm: float | "np.ndarray", temperature_k: float):
    """Bose-Einstein occupation for a mode of energy hbar*omega (cm^-1)."""
    import numpy as np

    x = np.asarray(energy_cm, dtype=float) / thermal_energy(temperature_k)
    return 1.0 / np.expm1(x)
