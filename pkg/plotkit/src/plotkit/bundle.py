"""Input discovery and validation for a single-run figure."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

REQUIRED_COLUMNS = {
    "field": ("t_fs", "E_MV_per_m"),
    "spectrogram": ("t_fs", "freq_cm", "intensity"),
    "trajectory": ("t_fs", "P_trans", "P_cis", "P_e"),
}

DEFAULT_STYLE = {
    "dpi": 150,
    "figsize": [7.0, 8.0],
    "cmap": "viridis",
    "time_unit": "auto",     # "auto" | "ps" | "fs"
    "freq_range": None,      # [lo, hi] in cm^-1, or None for data range
}


class BundleError(ValueError):
    pass


def _run_hash(csv_path: str) -> str:
    """Config hash of the run directory a CSV belongs to."""
    manifest = os.path.join(os.path.dirname(os.path.abspath(csv_path)),
                            "manifest.json")
    if not os.path.exists(manifest):
        raise BundleError(f"no manifest.json next to {csv_path!r}; refusing "
                          "inputs of unknown provenance")
    try:
        with open(manifest) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleError(f"cannot read {manifest!r}: {exc}")
    if "config_hash" not in data:
        raise BundleError(f"{manifest!r} has no config_hash")
    return str(data["config_hash"])


def _load_table(path: str, kind: str) -> np.ndarray:
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise BundleError(f"cannot read {path!r}: {exc}")
    have = set(data.dtype.names or ())
    missing = [c for c in REQUIRED_COLUMNS[kind] if c not in have]
    if missing:
        raise BundleError(
            f"{path!r} is missing columns {missing}; expected "
            f"{list(REQUIRED_COLUMNS[kind])}, found {sorted(have)}"
        )
    return data


@dataclass
class FigureBundle:
    """Paths and styling for one three-panel figure.

    All CSV inputs must come from the same run: the ``config_hash`` in the
    ``manifest.json`` next to each file must agree.
    """

    field_csv: str
    trajectory_csv: str
    output: str
    spectrogram_csv: str | None = None     # panel left empty if absent
    style: dict = field(default_factory=dict)

    @classmethod
    def from_directory(cls, run_dir: str, output: str,
                       style: dict | None = None) -> "FigureBundle":
        spect = os.path.join(run_dir, "spectrogram.csv")
        return cls(
            field_csv=os.path.join(run_dir, "field.csv"),
            trajectory_csv=os.path.join(run_dir, "trajectory.csv"),
            spectrogram_csv=spect if os.path.exists(spect) else None,
            output=output,
            style=style or {},
        )

    def resolved_style(self) -> dict:
        unknown = set(self.style) - set(DEFAULT_STYLE)
        if unknown:
            raise BundleError(f"unknown style keys {sorted(unknown)}; "
                              f"known: {sorted(DEFAULT_STYLE)}")
        return {**DEFAULT_STYLE, **self.style}

    def load(self) -> dict:
        """Validate provenance and parse every table."""
        paths = {"field": self.field_csv, "trajectory": self.trajectory_csv}
        if self.spectrogram_csv is not None:
            paths["spectrogram"] = self.spectrogram_csv

        hashes = {kind: _run_hash(p) for kind, p in paths.items()}
        if len(set(hashes.values())) > 1:
            raise BundleError(
                "inputs mix different runs: "
                + ", ".join(f"{k}={v}" for k, v in sorted(hashes.items()))
            )
        return {kind: _load_table(p, kind) for kind, p in paths.items()}
