import dataclasses

import numpy as np
import pytest

from isomctl.oct import (ControlField, OCTConfig, OCTError, OCTWorkspace,
                         cis_projector, duality_gap, initial_guess, optimize)
from isomctl.propagator import thermal_state

# Small, fast setting: short control window on the truncated eigensystem.
FAST = OCTConfig(t_final=300.0, t_horizon=20.0, dt=0.02, alpha=1e-5,
                 iterations=8, guess_amplitude=50.0, guess_width=5.0,
                 checkpoint_stride=200)


class TestConfig:
    def test_alpha_must_be_positive(self):
        with pytest.raises(OCTError, match="alpha"):
            dataclasses.replace(FAST, alpha=0.0).validate()

    def test_sense_must_be_known(self):
        with pytest.raises(OCTError, match="sense"):
            dataclasses.replace(FAST, sense="up").validate()

    def test_window_inside_target(self):
        with pytest.raises(OCTError, match="window"):
            dataclasses.replace(FAST, t_horizon=400.0).validate()

    def test_step_size(self):
        with pytest.raises(OCTError, match="step"):
            dataclasses.replace(FAST, dt=-1.0).validate()

    def test_undersampling_carrier_rejected(self, es_small, tensors_small):
        coarse = dataclasses.replace(FAST, dt=0.1)
        with pytest.raises(OCTError, match="undersamples"):
            OCTWorkspace(es_small, tensors_small, coarse)

    def test_sign(self):
        assert FAST.sign == 1.0
        assert dataclasses.replace(FAST, sense="min").sign == -1.0


class TestControlField:
    def test_times_are_step_midpoints(self):
        f = ControlField(values=np.zeros(4), dt=0.5)
        assert np.allclose(f.times, [0.25, 0.75, 1.25, 1.75])

    def test_fluence(self):
        f = ControlField(values=np.array([3.0, -4.0]), dt=0.5)
        assert f.fluence == pytest.approx(12.5)

    def test_to_sampled_half_step_grid(self):
        f = ControlField(values=np.array([1.0, 2.0]), dt=0.2)
        s = f.to_sampled()
        assert len(s.values) == 5
        assert np.allclose(s.times, [0.0, 0.1, 0.2, 0.3, 0.4])
        # piecewise constant: both samples of a step share its value
        assert np.allclose(s.values, [1.0, 1.0, 2.0, 2.0, 0.0])

    def test_initial_guess_shape_and_decay(self):
        g = initial_guess(FAST)
        assert len(g.values) == 1000
        assert np.abs(g.values).max() <= FAST.guess_amplitude
        # Gaussian envelope: down to exp(-(15/10)^2) ~ 0.105 by t=15 fs
        late = g.values[g.times > 3 * FAST.guess_width]
        assert np.abs(late).max() < 0.15 * FAST.guess_amplitude


class TestDuality:
    """Backward map is the exact adjoint of the discrete forward map."""

    def gap(self, es, tensors, cfg, field):
        return duality_gap(es, tensors, cfg, field)

    def test_guess_field(self, es_small, tensors_small):
        g = self.gap(es_small, tensors_small, FAST, initial_guess(FAST))
        assert g <= 1e-6

    def test_zero_field(self, es_small, tensors_small):
        zero = ControlField(values=np.zeros(1000), dt=FAST.dt)
        assert self.gap(es_small, tensors_small, FAST, zero) <= 1e-6

    def test_random_field_both_senses(self, es_small, tensors_small):
        rng = np.random.default_rng(9)
        f = ControlField(values=rng.normal(0.0, 30.0, 1000), dt=FAST.dt)
        for sense in ("max", "min"):
            cfg = dataclasses.replace(FAST, sense=sense)
            assert self.gap(es_small, tensors_small, cfg, f) <= 1e-6

    def test_zero_field_duality_equals_forward_yield(self, es_small,
                                                     tensors_small):
        """With no field the costate overlap reproduces the free cis yield."""
        ws = OCTWorkspace(es_small, tensors_small, FAST)
        zero = ControlField(values=np.zeros(ws.n_steps), dt=FAST.dt)
        rho0 = thermal_state(es_small, 300.0).matrix
        _, cis, _ = ws.objective_parts(zero, rho0)
        lam0 = ws.costate_at_zero(zero)
        overlap = float(np.real(np.trace(lam0.conj().T @ rho0)))
        assert overlap == pytest.approx(cis, abs=1e-12)


class TestOptimize:
    def test_objective_is_monotone(self, es_small, tensors_small):
        rep = optimize(es_small, tensors_small, FAST)
        assert len(rep.iterates) >= 2
        assert np.all(np.diff(rep.j_history) >= -FAST.monotone_tol)

    def test_minimization_collapses_fluence(self, es_small, tensors_small):
        cfg = dataclasses.replace(FAST, sense="min", iterations=5)
        rep = optimize(es_small, tensors_small, cfg)
        assert rep.iterates[-1].fluence < rep.iterates[0].fluence

    def test_huge_penalty_suppresses_field(self, es_small, tensors_small):
        cfg = dataclasses.replace(FAST, alpha=1e3, iterations=1)
        rep = optimize(es_small, tensors_small, cfg)
        assert np.abs(rep.iterates[-1].field).max() < 1e-3

    def test_mismatched_initial_field_rejected(self, es_small, tensors_small):
        bad = ControlField(values=np.zeros(10), dt=FAST.dt)
        with pytest.raises(OCTError, match="grid"):
            optimize(es_small, tensors_small, FAST, field0=bad)

    def test_report_artifacts(self, tmp_path, es_small, tensors_small):
        cfg = dataclasses.replace(FAST, iterations=2)
        rep = optimize(es_small, tensors_small, cfg)
        rep.write(str(tmp_path))
        rows = (tmp_path / "j_history.csv").read_text().splitlines()
        assert rows[0] == "iteration,J,cis_yield,fluence"
        assert len(rows) == len(rep.iterates) + 1
        assert (tmp_path / "field.csv").exists()

    def test_checkpoint_stride_does_not_change_result(self, es_small,
                                                      tensors_small):
        outs = []
        for stride in (100, 1000):
            cfg = dataclasses.replace(FAST, iterations=2,
                                      checkpoint_stride=stride)
            rep = optimize(es_small, tensors_small, cfg)
            outs.append(rep.iterates[-1].field)
        assert np.allclose(outs[0], outs[1], atol=1e-10)


def test_cis_projector_matches_labels(es_small):
    p = cis_projector(es_small)
    assert p.sum() == (es_small.labels == 1).sum()
    assert set(np.unique(p)) <= {0.0, 1.0}
