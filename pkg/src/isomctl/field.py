"""Laser fields: the 128-phase constrained pulse and free-form sampled fields.

The constrained field is a comb of cosine carriers with per-component
Gaussian time envelopes and Gaussian spectral weights; only the 128 phases
are free.  ``SampledField`` is the common currency consumed by the
propagator: a uniform time grid in fs with field values in MV/m.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .units import HBAR, TWO_PI_C, convert

CONSTRAINED_EXPANSION = "CONSTRAINED-EXPANSION"
OCT_FREE = "OCT-FREE"
ZERO = "ZERO"

#: minimum number of samples per optical period at the highest frequency
MIN_SAMPLES_PER_PERIOD = 20


class FieldError(ValueError):
    pass


@dataclass
class FieldSpec:
    """Phase-parameterized constrained pulse."""

    amplitude: float = 5.0        # MV/m, per component
    t0: float = 2000.0            # fs
    dt_width: float = 2000.0      # fs (the envelope scale; 2*dt_width in the exponent)
    omega0: float = 25000.0       # cm^-1
    domega: float = 200.0         # cm^-1
    freq_base: float = 24800.0    # cm^-1
    freq_step: float = 3.125      # cm^-1
    phases: np.ndarray = field(default_factory=lambda: np.zeros(128))

    def __post_init__(self):
        self.phases = np.mod(np.asarray(self.phases, dtype=float), 2.0 * np.pi)
        if self.phases.shape != (128,):
            raise FieldError(f"expected exactly 128 phases, got {self.phases.shape}")

    @property
    def frequencies(self) -> np.ndarray:
        """Component frequencies in cm^-1."""
        return self.freq_base + self.freq_step * np.arange(128)

    @property
    def spectral_weights(self) -> np.ndarray:
        return np.exp(-(((self.frequencies - self.omega0) / (2.0 * self.domega)) ** 2))

    def envelope_bound(self, t) -> np.ndarray:
        """Upper bound on |E(t)| (all carriers aligned)."""
        t = np.asarray(t, dtype=float)
        gauss = np.exp(-(((t - self.t0) / (2.0 * self.dt_width)) ** 2))
        return self.amplitude * self.spectral_weights.sum() * gauss

    def support_end(self, eps_field: float) -> float:
        """Time after which |E(t)| stays below ``eps_field`` (MV/m)."""
        peak = self.amplitude * self.spectral_weights.sum()
        if eps_field >= peak:
            return self.t0
        return self.t0 + 2.0 * self.dt_width * np.sqrt(np.log(peak / eps_field))

    def to_dict(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "t0": self.t0,
            "dt_width": self.dt_width,
            "omega0": self.omega0,
            "domega": self.domega,
            "freq_base": self.freq_base,
            "freq_step": self.freq_step,
            "phases": self.phases.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FieldSpec":
        d = dict(d)
        d["phases"] = np.asarray(d.get("phases", np.zeros(128)), dtype=float)
        return cls(**d)


@dataclass
class SampledField:
    """Field samples on a uniform time grid."""

    times: np.ndarray             # fs
    values: np.ndarray            # MV/m
    provenance: str = OCT_FREE

    def __post_init__(self):
        if self.times.shape != self.values.shape:
            raise FieldError("times and values must have matching shapes")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def value_at_index(self, i: int) -> float:
        return float(self.values[i])

    def to_csv(self, path: str) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_fs", "E_MV_per_m"])
            for t, v in zip(self.times, self.values):
                writer.writerow([f"{t:.6g}", f"{v:.10g}"])


def required_sample_spacing(omega_max_cm: float) -> float:
    """Largest dt (fs) satisfying the sampling invariant at omega_max."""
    period = 2.0 * np.pi / (omega_max_cm * TWO_PI_C)
    return period / MIN_SAMPLES_PER_PERIOD


def synthesize(spec: FieldSpec, t_grid: np.ndarray,
               provenance: str = CONSTRAINED_EXPANSION) -> SampledField:
    """Literal evaluation of the 128-component constrained field."""
    t_grid = np.asarray(t_grid, dtype=float)
    if len(t_grid) > 1:
        dt = t_grid[1] - t_grid[0]
        dt_req = required_sample_spacing(spec.frequencies[-1])
        if dt > dt_req * (1 + 1e-9):
            raise FieldError(
                f"grid spacing {dt:.4g} fs undersamples the field; "
                f"need dt <= {dt_req:.4g} fs"
            )
    gauss_t = np.exp(-(((t_grid - spec.t0) / (2.0 * spec.dt_width)) ** 2))
    weights = spec.amplitude * spec.spectral_weights
    omegas = spec.frequencies * TWO_PI_C      # rad/fs
    values = np.zeros_like(t_grid)
    # chunk over components to bound the temporary array size
    for start in range(0, 128, 16):
        sl = slice(start, start + 16)
        values += np.cos(np.outer(omegas[sl], t_grid)
                         + spec.phases[sl, None]).T @ weights[sl]
    values *= gauss_t
    return SampledField(times=t_grid, values=values, provenance=provenance)


def zero_field(t_grid: np.ndarray) -> SampledField:
    t_grid = np.asarray(t_grid, dtype=float)
    return SampledField(times=t_grid, values=np.zeros_like(t_grid), provenance=ZERO)


def pulse_area(f: SampledField, mu_ge_debye: float) -> float:
    """Dimensionless pulse area mu * integral(|E|) / hbar."""
    if len(f.times) < 2:
        return 0.0
    e_int = np.trapezoid(np.abs(f.values), f.times)      # MV/m * fs
    return mu_ge_debye * convert(e_int, "MV/m", "cm-1/debye") / HBAR


@dataclass
class Spectrogram:
    times: np.ndarray         # fs, frame centers
    frequencies: np.ndarray   # cm^-1
    intensity: np.ndarray     # (n_freq, n_time), normalized to unit maximum

    def to_csv(self, path: str) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_fs", "freq_cm", "intensity"])
            for j, t in enumerate(self.times):
                for i, nu in enumerate(self.frequencies):
                    writer.writerow([f"{t:.6g}", f"{nu:.6g}",
                                     f"{self.intensity[i, j]:.6g}"])


def spectrogram(f: SampledField, window_fwhm: float = 150.0,
                time_stride: float | None = None,
                freq_max: float | None = None) -> Spectrogram:
    """Gaussian-windowed time-frequency map, unit peak normalization."""
    dt = f.dt
    duration = f.times[-1] - f.times[0]
    if window_fwhm >= duration:
        raise FieldError("window must be narrower than the field duration")
    sigma = window_fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    half = int(round(4.0 * sigma / dt))
    window = np.exp(-0.5 * (np.arange(-half, half + 1) * dt / sigma) ** 2)
    stride = max(1, int(round((time_stride or window_fwhm / 3.0) / dt)))

    centers = np.arange(half, len(f.values) - half, stride)
    if len(centers) == 0:
        raise FieldError("field is too short for the requested window")
    n_fft = len(window)
    c_cm_per_fs = TWO_PI_C / (2.0 * np.pi)
    freqs_cm = np.fft.rfftfreq(n_fft, d=dt) / c_cm_per_fs
    if freq_max is None:
        freq_max = 1.5 * freqs_cm[-1]
    keep = freqs_cm <= freq_max
    out = np.empty((keep.sum(), len(centers)))
    for col, c in enumerate(centers):
        seg = f.values[c - half:c + half + 1] * window
        out[:, col] = np.abs(np.fft.rfft(seg)[keep]) ** 2
    peak = out.max()
    if peak > 0:
        out /= peak
    return Spectrogram(times=f.times[centers], frequencies=freqs_cm[keep],
                       intensity=out)
