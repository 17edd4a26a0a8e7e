"""Secular Redfield relaxation and dephasing tensors from an Ohmic bath.

The bath enters only through its Ohmic spectral density J and the Bose
occupation; its oscillators are never instantiated.  Closed forms:

* population transfer rate (downhill, hbar*omega = E_from - E_to > 0):
      w = |Q_ij|^2 J(omega) [n(omega) + 1] / hbar
  and the detailed-balance partner J(omega) n(omega) / hbar uphill,
* dephasing:
      gamma_ij = (sum of outgoing rates of i and j) / 2
                 + (Q_ii - Q_jj)^2 W(0) / 2,
  with W(0) = eta k_B T / hbar, the zero-frequency limit of both branches.

Energies are in cm^-1 and rates in fs^-1.  ``spectral_density`` and
``one_sided_rate`` work in cm^-1-equivalent units (divide by HBAR for fs^-1);
``build_tensors`` returns rates in fs^-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EigenSystem
from .units import HBAR, bose_occupation, thermal_energy


class BathError(ValueError):
    pass


@dataclass(frozen=True)
class BathSpec:
    """Ohmic bath parameters."""

    eta: float = 5.0             # dimensionless coupling strength
    omega_c: float = 450.0       # cm^-1 cutoff
    temperature: float = 300.0   # K

    def validate(self) -> None:
        if self.eta <= 0 or self.omega_c <= 0 or self.temperature <= 0:
            raise BathError("eta, omega_c and temperature must be positive")


def spectral_density(omega, bath: BathSpec):
    """Ohmic spectral density eta * omega * exp(-omega/omega_c).

    ``omega`` is hbar*omega in cm^-1, >= 0; the result is in the same
    cm^-1-equivalent units.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise BathError("spectral_density is defined for omega >= 0; "
                        "use one_sided_rate for signed frequencies")
    return bath.eta * omega * np.exp(-omega / bath.omega_c)


def one_sided_rate(omega, bath: BathSpec):
    """Half-Fourier bath correlation rate W(omega), cm^-1-equivalent.

    Emission J(omega)[n+1] for omega > 0, absorption J(-omega)n(-omega) for
    omega < 0, and the continuous limit eta*k_B*T at omega = 0.  Divide by
    HBAR for fs^-1.
    """
    omega = np.asarray(omega, dtype=float)
    kt = thermal_energy(bath.temperature)
    flat = np.atleast_1d(omega)
    aw = np.abs(flat)
    with np.errstate(over="ignore", divide="ignore"):
        j = bath.eta * aw * np.exp(-aw / bath.omega_c)
        # Uphill branch J(|w|) n(|w|); the downhill branch adds J(|w|) on top.
        # Occupations too small for expm1 are exactly zero, so a cold bath
        # never excites.
        x = np.where(aw > 0, aw / kt, np.inf)
        n = np.where(x < 700.0, 1.0 / np.expm1(np.minimum(x, 700.0)), 0.0)
    out = j * n + np.where(flat > 0, j, 0.0)
    out[aw == 0] = bath.eta * kt
    return out.reshape(omega.shape) if omega.shape else float(out[0])


@dataclass
class RedfieldTensors:
    """Secular Redfield rates over a truncated eigenbasis.

    ``rates[i, j]`` is the population transfer rate *into* state i *from*
    state j (fs^-1, zero diagonal); ``gamma[i, j]`` the coherence decay rate
    (fs^-1, symmetric); ``w0`` the zero-frequency rate eta k_B T / hbar.
    """

    bath: BathSpec
    rates: np.ndarray
    gamma: np.ndarray
    w0: float

    @property
    def size(self) -> int:
        return self.rates.shape[0]

    @property
    def rate_generator(self) -> np.ndarray:
        """R such that dp/dt = R p for the field-free populations."""
        return self.rates - np.diag(self.rates.sum(axis=0))


def build_tensors(es: EigenSystem, bath: BathSpec) -> RedfieldTensors:
    """Transition and dephasing rate matrices for the retained eigenbasis."""
    bath.validate()
    lam = es.energies
    gap = lam[None, :] - lam[:, None]        # gap[i, j] = E_j - E_i
    # rates[i, j]: j -> i transition; emission when E_j > E_i.
    w = one_sided_rate(gap, bath) / HBAR
    rates = np.abs(es.q) ** 2 * w
    np.fill_diagonal(rates, 0.0)

    out = rates.sum(axis=0)                  # total escape rate per state
    w0 = bath.eta * thermal_energy(bath.temperature) / HBAR
    qd = np.diag(es.q)
    gamma = 0.5 * (out[:, None] + out[None, :]) \
        + 0.5 * (qd[:, None] - qd[None, :]) ** 2 * w0
    np.fill_diagonal(gamma, 0.0)
    return RedfieldTensors(bath=bath, rates=rates, gamma=gamma, w0=w0)
