"""Two-surface system Hamiltonian on a periodic grid and its eigenbasis.

The reaction coordinate is a single periodic angle phi in [0, 2pi).  The
Hamiltonian is built on an N-point Fourier grid with the kinetic operator
applied spectrally (exact for band-limited functions), diagonalized densely,
and truncated to the lowest states.  Eigenstates are classified into stable
trans (ground-surface, localized near phi=0), stable cis (ground-surface,
localized near phi=pi) and excited states.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .units import KINETIC_CM, thermal_energy

TRANS, CIS, EXCITED = 0, 1, 2
LABEL_NAMES = {TRANS: "TRANS", CIS: "CIS", EXCITED: "EXCITED"}


class ModelError(ValueError):
    pass


class ResolutionError(ModelError):
    """The grid cannot represent the requested energy range."""


class ClassificationError(ModelError):
    """Not enough localized candidates to assign the trans/cis labels."""


@dataclass(frozen=True)
class ModelSpec:
    """Physical and numerical parameters of the isomerization model."""

    mass: float = 5.0            # amu Angstrom^2
    a0: float = 15900.0          # cm^-1, ground-surface amplitude
    a1: float = 17500.0          # cm^-1, excited-surface offset
    a2: float = 7500.0           # cm^-1, excited-surface amplitude
    v_eg: float = 1000.0         # cm^-1, diabatic coupling
    mu_ge: float = 10.0          # Debye, transition dipole
    n_grid: int = 256
    n_basis: int = 300           # retain this many lowest eigenstates ...
    e_max: float | None = None   # ... or every state below this energy (cm^-1)
    temperature: float = 300.0   # K
    n_trans: int = 49
    n_cis: int = 23

    def validate(self) -> None:
        if self.n_grid < 64 or self.n_grid & (self.n_grid - 1):
            raise ModelError(f"n_grid must be a power of two >= 64, got {self.n_grid}")
        for name in ("a0", "a2", "v_eg", "mass", "temperature", "mu_ge"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")
        if self.e_max is None and self.n_basis < self.n_trans + self.n_cis:
            raise ModelError("n_basis cannot hold the classified states")

    @property
    def kinetic_prefactor(self) -> float:
        """hbar^2/2m in cm^-1 (coefficient of k^2 for plane waves e^{ik phi})."""
        return KINETIC_CM / self.mass

    def config_hash(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def phi_grid(n_grid: int) -> np.ndarray:
    return np.arange(n_grid) * (2.0 * np.pi / n_grid)


def ground_potential(spec: ModelSpec, phi: np.ndarray) -> np.ndarray:
    return spec.a0 * (1.0 - np.cos(phi))

def excited_potential(spec: ModelSpec, phi: np.ndarray) -> np.ndarray:
    return spec.a1 + spec.a2 * np.cos(phi)


def build_hamiltonian(spec: ModelSpec) -> np.ndarray:
    """Dense 2N x 2N Hermitian Hamiltonian on the periodic phi grid.

    Basis ordering: the first N entries are the ground-surface grid
    amplitudes, the last N the excited-surface ones.
    """
    spec.validate()
    n = spec.n_grid
    phi = phi_grid(n)

    # Spectral kinetic operator: T = F^-1 diag(B k^2) F, real symmetric.
    k = np.fft.fftfreq(n, d=1.0 / n)        # integer wavenumbers
    tk = spec.kinetic_prefactor * k**2
    kin = np.fft.ifft(tk[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0).real

    k_max_energy = spec.kinetic_prefactor * (n // 2) ** 2
    if spec.e_max is not None and spec.e_max > 0.7 * k_max_energy:
        n_req = _required_grid(spec.e_max, spec.kinetic_prefactor)
        raise ResolutionError(
            f"grid of {n} points resolves kinetic energies only up to "
            f"{k_max_energy:.0f} cm^-1; representing states up to "
            f"{spec.e_max:.0f} cm^-1 needs n_grid >= {n_req}"
        )

    h = np.zeros((2 * n, 2 * n))
    h[:n, :n] = kin + np.diag(ground_potential(spec, phi))
    h[n:, n:] = kin + np.diag(excited_potential(spec, phi))
    h[:n, n:] = np.diag(np.full(n, spec.v_eg))
    h[n:, :n] = h[:n, n:].T
    return h


def _required_grid(e_max: float, kinetic_prefactor: float) -> int:
    n = 64
    while kinetic_prefactor * (n // 2) ** 2 < 2.0 * e_max:
        n *= 2
    return n


@dataclass
class EigenSystem:
    """Truncated eigenbasis of the coupled two-surface Hamiltonian."""

    spec: ModelSpec
    energies: np.ndarray          # (M,) cm^-1, ascending
    vectors: np.ndarray           # (2N, M) grid amplitudes, columns orthonormal
    mu: np.ndarray                # (M, M) dipole matrix, Debye
    q: np.ndarray                 # (M, M) bath-coupling matrix, dimensionless
    labels: np.ndarray            # (M,) TRANS / CIS / EXCITED
    ground_weight: np.ndarray     # (M,) weight on the lower adiabatic surface
    cos_phi: np.ndarray           # (M,) <cos phi>

    @property
    def size(self) -> int:
        return len(self.energies)

    @property
    def trans_states(self) -> np.ndarray:
        return np.flatnonzero(self.labels == TRANS)

    @property
    def cis_states(self) -> np.ndarray:
        return np.flatnonzero(self.labels == CIS)

    @property
    def excited_states(self) -> np.ndarray:
        return np.flatnonzero(self.labels == EXCITED)

    def gibbs_populations(self, temperature: float | None = None) -> np.ndarray:
        t = self.spec.temperature if temperature is None else temperature
        w = np.exp(-(self.energies - self.energies[0]) / thermal_energy(t))
        return w / w.sum()

    # --- serialization --------------------------------------------------------

    def save(self, path: str) -> None:
        np.savez_compressed(
            path,
            spec_json=json.dumps(dataclasses.asdict(self.spec)),
            energies=self.energies,
            vectors=self.vectors,
            mu=self.mu,
            q=self.q,
            labels=self.labels,
            ground_weight=self.ground_weight,
            cos_phi=self.cos_phi,
        )

    @classmethod
    def load(cls, path: str) -> "EigenSystem":
        data = np.load(path, allow_pickle=False)
        spec = ModelSpec(**json.loads(str(data["spec_json"])))
        return cls(
            spec=spec,
            energies=data["energies"],
            vectors=data["vectors"],
            mu=data["mu"],
            q=data["q"],
            labels=data["labels"],
            ground_weight=data["ground_weight"],
            cos_phi=data["cos_phi"],
        )


def _adiabatic_ground_weight(spec: ModelSpec, vectors: np.ndarray) -> np.ndarray:
    """Projection of each eigenvector onto the lower adiabatic surface."""
    n = spec.n_grid
    phi = phi_grid(n)
    vg = ground_potential(spec, phi)
    ve = excited_potential(spec, phi)
    # Lower eigenvector of [[vg, v_eg], [v_eg, ve]] at each grid point.
    delta = 0.5 * (ve - vg)
    r = np.hypot(delta, spec.v_eg)
    # components (cos t, -sin t) with tan(2t) = v_eg/delta, picked stably:
    low_g = np.sqrt(0.5 * (1.0 + delta / r))
    low_e = -np.sign(spec.v_eg) * np.sqrt(0.5 * (1.0 - delta / r))
    amp = low_g[:, None] * vectors[:n, :] + low_e[:, None] * vectors[n:, :]
    return np.sum(np.abs(amp) ** 2, axis=0)


def diagonalize(h: np.ndarray, spec: ModelSpec) -> EigenSystem:
    """Diagonalize, truncate, and build the eigenbasis operators."""
    if not np.allclose(h, h.conj().T, atol=1e-9 * max(1.0, np.abs(h).max())):
        raise ModelError("Hamiltonian is not Hermitian")
    n = spec.n_grid

    energies, vectors = np.linalg.eigh(h)

    if spec.e_max is not None:
        m = int(np.searchsorted(energies, spec.e_max, side="right"))
    else:
        m = spec.n_basis
    if m < spec.n_trans + spec.n_cis:
        raise ModelError(
            f"truncation retains {m} states; need at least "
            f"{spec.n_trans + spec.n_cis} to host the classified states"
        )
    m = min(m, len(energies))

    k_max_energy = spec.kinetic_prefactor * (n // 2) ** 2
    if energies[m - 1] - energies[0] > 0.7 * k_max_energy:
        n_req = _required_grid(energies[m - 1] - energies[0], spec.kinetic_prefactor)
        raise ResolutionError(
            f"retained spectrum reaches {energies[m - 1]:.0f} cm^-1 but the "
            f"{n}-point grid is only trustworthy to "
            f"{0.7 * k_max_energy:.0f} cm^-1; use n_grid >= {n_req}"
        )

    energies = energies[:m].copy()
    vectors = vectors[:, :m].copy()

    phi = phi_grid(n)
    cos = np.cos(phi)
    g = vectors[:n, :]
    e = vectors[n:, :]

    q = g.T @ (cos[:, None] * g) + e.T @ (cos[:, None] * e)
    mu = spec.mu_ge * (g.T @ e + e.T @ g)
    q = 0.5 * (q + q.T)
    mu = 0.5 * (mu + mu.T)

    cos_phi = np.diag(q).copy()

    # Reorder degenerate pairs by <cos phi> descending for reproducibility.
    order = np.arange(m)
    i = 0
    while i < m - 1:
        j = i + 1
        while j < m and energies[j] - energies[i] < 1e-6:
            j += 1
        if j - i > 1:
            block = order[i:j]
            order[i:j] = block[np.argsort(-cos_phi[block], kind="stable")]
        i = j
    if not np.array_equal(order, np.arange(m)):
        vectors = vectors[:, order]
        q = q[np.ix_(order, order)]
        mu = mu[np.ix_(order, order)]
        cos_phi = cos_phi[order]
        energies = energies[order]

    es = EigenSystem(
        spec=spec,
        energies=energies,
        vectors=vectors,
        mu=mu,
        q=q,
        labels=np.full(m, EXCITED, dtype=np.int64),
        ground_weight=_adiabatic_ground_weight(spec, vectors),
        cos_phi=cos_phi,
    )
    return classify_states(es)


def classify_states(es: EigenSystem) -> EigenSystem:
    """Assign TRANS/CIS/EXCITED labels.

    The lowest-energy states with dominant lower-adiabatic-surface weight are
    split by the sign of <cos phi>: positive (localized near phi=0) feeds the
    trans pool, negative (near phi=pi) the cis pool.
    """
    spec = es.spec
    labels = np.full(es.size, EXCITED, dtype=np.int64)
    bound = es.ground_weight > 0.5
    trans_pool = np.flatnonzero(bound & (es.cos_phi > 0.0))
    cis_pool = np.flatnonzero(bound & (es.cos_phi < 0.0))
    for pool, count, name in (
        (trans_pool, spec.n_trans, "trans"),
        (cis_pool, spec.n_cis, "cis"),
    ):
        if len(pool) < count:
            listing = ", ".join(
                f"#{i} E={es.energies[i]:.1f} w={es.ground_weight[i]:.2f} "
                f"<cos>={es.cos_phi[i]:+.2f}"
                for i in pool
            )
            raise ClassificationError(
                f"only {len(pool)} {name} candidates for {count} required "
                f"labels; candidates: [{listing}]"
            )
    labels[trans_pool[: spec.n_trans]] = TRANS
    labels[cis_pool[: spec.n_cis]] = CIS
    es.labels = labels
    return es


def build_eigensystem(spec: ModelSpec) -> EigenSystem:
    return diagonalize(build_hamiltonian(spec), spec)


def cached_eigensystem(spec: ModelSpec, cache_dir: str | None = None,
                       force: bool = False) -> EigenSystem:
    """Build or reuse a cached eigensystem, keyed by the spec hash."""
    cache_dir = cache_dir or os.environ.get("ISOMCTL_CACHE_DIR")
    if cache_dir is None:
        return build_eigensystem(spec)
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, f"eigen-{spec.config_hash()}.npz")
    if not force and os.path.exists(path):
        return EigenSystem.load(path)
    es = build_eigensystem(spec)
    es.save(path)
    return es
