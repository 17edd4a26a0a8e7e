"""Density-matrix propagation under secular Redfield dissipation and a field.

The equations of motion couple populations (field commutator plus a
classical rate matrix) and coherences (free rotation, dephasing, field
commutator).  Two schemes integrate the coherent stage:

* ``rk4``  - classic explicit Runge-Kutta on the field term with the exact
  free/dissipative factors folded analytically into every stage (an
  integrating-factor RK4; no rotating-wave approximation),
* ``split`` - Strang splitting: exact free/dissipative half steps around an
  exact dipole-kick rotation by the integrated field angle.  Its one-step
  map has an exact adjoint, which the optimal-control module relies on.

Once the field is exhausted and the coherences have decayed, evolution is
continued analytically: populations by the exponential of the rate
generator in steps of at most ``rate_dt``, coherences by their exact
damped phase factors.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field as dfield

import numpy as np
from scipy.linalg import expm

from .bath import RedfieldTensors
from .field import SampledField
from .model import EigenSystem
from .units import DEBYE_MVM_TO_CM, HBAR, thermal_energy

CIS_OVER_AREA = "CIS_OVER_AREA"
CIS = "CIS"
MINUS_CIS_OVER_AREA = "MINUS_CIS_OVER_AREA"
OBJECTIVE_KINDS = (CIS_OVER_AREA, CIS, MINUS_CIS_OVER_AREA)


class PropagationError(RuntimeError):
    pass


@dataclass
class PropagatorConfig:
    dt: float = 0.1               # fs, coherent-stage step
    scheme: str = "rk4"           # "rk4" | "split"
    eps_field_rel: float = 1e-6   # field-off threshold, relative to the
                                  # single-component amplitude scale
    eps_coherence: float = 1e-8   # coherence-norm threshold for the fast path
    stride_pulse: float = 10.0    # fs, output stride while the field is on
    stride_free: float = 100.0    # fs, output stride afterwards
    rate_dt: float = 10.0         # fs, maximum fast-path population step
    trace_tol: float = 1e-6       # per-step trace drift abort threshold

    def validate(self) -> None:
        if self.scheme not in ("rk4", "split"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class DensityMatrix:
    matrix: np.ndarray
    time: float = 0.0

    def validate(self, atol: float = 1e-9) -> None:
        m = self.matrix
        if np.abs(m - m.conj().T).max() > 1e-10:
            raise PropagationError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > atol:
            raise PropagationError("density matrix trace differs from 1")
        if np.diag(m).real.min() < -atol or np.diag(m).real.max() > 1 + atol:
            raise PropagationError("populations outside [0, 1]")

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.matrix.copy(), self.time)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    p_trans: np.ndarray
    p_cis: np.ndarray
    p_e: np.ndarray
    coherence_norm: np.ndarray
    field: np.ndarray
    pulse_area: float = 0.0
    final_rho: np.ndarray | None = None
    metadata: dict = dfield(default_factory=dict)

    @property
    def final_cis(self) -> float:
        return float(self.p_cis[-1])

    @property
    def max_p_e(self) -> float:
        return float(self.p_e.max())

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_fs", "P_trans", "P_cis", "P_e",
                             "coh_norm", "E_field"])
            for row in zip(self.times, self.p_trans, self.p_cis, self.p_e,
                           self.coherence_norm, self.field):
                writer.writerow([f"{v:.10g}" for v in row])

    def summary(self) -> dict:
        return {
            "final_cis": self.final_cis,
            "final_trans": float(self.p_trans[-1]),
            "max_p_e": self.max_p_e,
            "pulse_area": self.pulse_area,
            "objective_cis_over_area": objective(self, CIS_OVER_AREA),
            **self.metadata,
        }


def thermal_state(es: EigenSystem, temperature: float) -> DensityMatrix:
    """Diagonal Gibbs state over the retained eigenbasis."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    p = es.gibbs_populations(temperature)
    return DensityMatrix(np.diag(p).astype(complex), 0.0)


def objective(tr: TrajectoryRecord, kind: str) -> float:
    if kind == CIS:
        return tr.final_cis
    if kind in (CIS_OVER_AREA, MINUS_CIS_OVER_AREA):
        if tr.pulse_area <= 0.0:
            val = 0.0
        else:
            val = tr.final_cis / tr.pulse_area
        return -val if kind == MINUS_CIS_OVER_AREA else val
    raise ValueError(f"unknown objective kind {kind!r}")


class Propagator:
    """Precomputed workspace for repeated propagations of one model."""

    def __init__(self, es: EigenSystem, tensors: RedfieldTensors,
                 config: PropagatorConfig | None = None):
        self.es = es
        self.tensors = tensors
        self.config = config or PropagatorConfig()
        self.config.validate()
        dt = self.config.dt

        lam = es.energies
        omega = (lam[:, None] - lam[None, :]) / HBAR       # rad/fs
        decay = -1j * omega - tensors.gamma
        self._phase_half = np.exp(decay * (dt / 2.0))
        np.fill_diagonal(self._phase_half, 1.0)

        r = tensors.rate_generator
        self._rate_half = expm(r * (dt / 2.0))
        self._rate_full = self._rate_half @ self._rate_half
        if self.config.scheme == "rk4":
            self._phase_full = self._phase_half * self._phase_half
            self._phase_half_inv = np.exp(-decay * (dt / 2.0))
            np.fill_diagonal(self._phase_half_inv, 1.0)
            self._phase_full_inv = self._phase_half_inv * self._phase_half_inv
            self._rate_half_inv = expm(-r * (dt / 2.0))
            self._rate_full_inv = self._rate_half_inv @ self._rate_half_inv

        # dipole eigenbasis for the exact kick (mu is real symmetric)
        self._mu = np.ascontiguousarray(es.mu)
        self._mu_evals, self._mu_evecs = np.linalg.eigh(self._mu)

        # analytic fast-path pieces
        self._rate_generator = r
        self._rate_fast = expm(r * self.config.rate_dt)
        self._gibbs = es.gibbs_populations()
        self._field_scale = DEBYE_MVM_TO_CM / HBAR   # MV/m -> rad/(fs*Debye)

    # ------------------------------------------------------------------
    # elementary linear maps
    # ------------------------------------------------------------------

    def _apply_free(self, rho: np.ndarray, phase: np.ndarray,
                    rate_prop: np.ndarray) -> np.ndarray:
        out = rho * phase
        np.fill_diagonal(out, rate_prop @ np.diag(rho))
        return out

    def _commutator_term(self, rho: np.ndarray, coeff: float) -> np.ndarray:
        # -i * coeff * (rho mu - mu rho)
        a = rho @ self._mu
        a -= self._mu @ rho
        a *= -1j * coeff
        return a

    def kick_operator(self, theta: float) -> np.ndarray:
        """Unitary exp(+i theta mu) in the eigenbasis (theta in 1/Debye)."""
        u = self._mu_evecs
        ph = np.exp(1j * theta * self._mu_evals)
        w_re = (u * ph.real) @ u.T
        w_im = (u * ph.imag) @ u.T
        return w_re + 1j * w_im

    def split_step(self, rho: np.ndarray, theta: float,
                   adjoint: bool = False) -> np.ndarray:
        """One Strang step; ``theta`` is the integrated kick angle.

        With ``adjoint=True`` this applies the exact transpose of the
        forward one-step map (used by backward costate propagation).
        """
        if adjoint:
            phase = self._phase_half.conj()
            rate = self._rate_half.T
            theta = -theta
        else:
            phase = self._phase_half
            rate = self._rate_half
        rho = self._apply_free(rho, phase, rate)
        if theta != 0.0:
            w = self.kick_operator(theta)
            rho = w @ rho @ w.conj().T
        return self._apply_free(rho, phase, rate)

    def rk4_step(self, rho: np.ndarray, e0: float, em: float,
                 e1: float) -> np.ndarray:
        """Integrating-factor RK4 step; e0/em/e1 are field samples (MV/m)."""
        dt = self.config.dt
        c0 = e0 * self._field_scale
        cm = em * self._field_scale
        c1 = e1 * self._field_scale

        k1 = self._commutator_term(rho, c0)

        u = rho + (dt / 2.0) * k1
        u = self._apply_free(u, self._phase_half, self._rate_half)
        k2 = self._commutator_term(u, cm)
        k2 = self._apply_free(k2, self._phase_half_inv, self._rate_half_inv)

        u = rho + (dt / 2.0) * k2
        u = self._apply_free(u, self._phase_half, self._rate_half)
        k3 = self._commutator_term(u, cm)
        k3 = self._apply_free(k3, self._phase_half_inv, self._rate_half_inv)

        u = rho + dt * k3
        u = self._apply_free(u, self._phase_full, self._rate_full)
        k4 = self._commutator_term(u, c1)
        k4 = self._apply_free(k4, self._phase_full_inv, self._rate_full_inv)

        out = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return self._apply_free(out, self._phase_full, self._rate_full)

    # ------------------------------------------------------------------
    # public stepping / propagation
    # ------------------------------------------------------------------

    def step(self, rho: DensityMatrix, field_window: np.ndarray) -> DensityMatrix:
        """Advance one dt using field samples [E(t), E(t+dt/2), E(t+dt)]."""
        e0, em, e1 = field_window
        trace_before = np.trace(rho.matrix).real
        if self.config.scheme == "rk4":
            out = self.rk4_step(rho.matrix, e0, em, e1)
        else:
            theta = (e0 + 4.0 * em + e1) / 6.0 * self.config.dt \
                * self._field_scale
            out = self.split_step(rho.matrix, theta)
        out = 0.5 * (out + out.conj().T)
        drift = abs(np.trace(out).real - trace_before)
        if drift > self.config.trace_tol:
            raise PropagationError(
                f"trace drifted by {drift:.2e} in one step at "
                f"t={rho.time:.2f} fs; reduce dt"
            )
        return DensityMatrix(out, rho.time + self.config.dt)

    def _analytic_free(self, rho: np.ndarray, delta_t: float) -> np.ndarray:
        """Exact field-free evolution over delta_t (secular: blocks decouple)."""
        lam = self.es.energies
        omega = (lam[:, None] - lam[None, :]) / HBAR
        phase = np.exp((-1j * omega - self.tensors.gamma) * delta_t)
        out = rho * phase
        steps, rem = divmod(delta_t, self.config.rate_dt)
        p = np.diag(rho).real.copy()
        for _ in range(int(steps)):
            p = self._rate_fast @ p
        if rem > 1e-12:
            p = expm(self._rate_generator * rem) @ p
        np.fill_diagonal(out, p)
        return out

    def propagate(self, rho0: DensityMatrix, f: SampledField, t_final: float,
                  pulse_area: float = 0.0,
                  field_end: float | None = None) -> TrajectoryRecord:
        """Integrate to ``t_final`` (fs), sampling populations on the way."""
        cfg = self.config
        dt = cfg.dt
        if len(f.times) > 1:
            spacing = f.times[1] - f.times[0]
            if abs(spacing - dt / 2.0) > 1e-9 * dt:
                raise PropagationError(
                    f"field grid spacing {spacing} does not match dt/2 = {dt / 2}"
                )

        eps_field = cfg.eps_field_rel * (np.abs(f.values).max()
                                         if len(f.values) else 0.0)
        if field_end is None:
            nz = np.flatnonzero(np.abs(f.values) > eps_field)
            field_end = float(f.times[nz[-1]]) if len(nz) else float(f.times[0])
        field_end = min(field_end, t_final)

        n_steps = max(0, int(np.ceil((field_end - f.times[0]) / dt - 1e-9)))
        record_every = max(1, int(round(cfg.stride_pulse / dt)))

        labels = self.es.labels
        trans_idx = labels == 0
        cis_idx = labels == 1
        exc_idx = labels == 2

        times, pt, pc, pe, coh, ev = [], [], [], [], [], []

        def record(rho_m: np.ndarray, t: float, e_val: float):
            d = np.diag(rho_m).real
            times.append(t)
            pt.append(d[trans_idx].sum())
            pc.append(d[cis_idx].sum())
            pe.append(d[exc_idx].sum())
            off = rho_m - np.diag(np.diag(rho_m))
            coh.append(float(np.sum(np.abs(off) ** 2)))
            ev.append(e_val)

        rho = rho0.matrix.astype(complex).copy()
        t = rho0.time
        record(rho, t, f.values[0] if len(f.values) else 0.0)
        trace0 = np.trace(rho).real

        use_split = cfg.scheme == "split"
        for i in range(n_steps):
            base = 2 * i
            e0 = f.values[base]
            em = f.values[base + 1] if base + 1 < len(f.values) else 0.0
            e1 = f.values[base + 2] if base + 2 < len(f.values) else 0.0
            if use_split:
                theta = (e0 + 4.0 * em + e1) / 6.0 * dt * self._field_scale
                rho = self.split_step(rho, theta)
            else:
                rho = self.rk4_step(rho, e0, em, e1)
            t += dt
            if (i + 1) % record_every == 0:
                rho = 0.5 * (rho + rho.conj().T)
                drift = abs(np.trace(rho).real - trace0)
                if drift > cfg.trace_tol * record_every:
                    raise PropagationError(
                        f"trace drifted by {drift:.2e} by t={t:.1f} fs; "
                        "reduce dt"
                    )
                record(rho, t, e1)

        # field exhausted: analytic free evolution, sampled at stride_free
        rho = 0.5 * (rho + rho.conj().T)
        while t < t_final - 1e-9:
            step = min(cfg.stride_free, t_final - t)
            rho = self._analytic_free(rho, step)
            t += step
            record(rho, t, 0.0)

        return TrajectoryRecord(
            times=np.asarray(times),
            p_trans=np.asarray(pt),
            p_cis=np.asarray(pc),
            p_e=np.asarray(pe),
            coherence_norm=np.asarray(coh),
            field=np.asarray(ev),
            pulse_area=pulse_area,
            final_rho=rho,
            metadata={"scheme": cfg.scheme, "dt": dt,
                      "field_end": field_end},
        )
