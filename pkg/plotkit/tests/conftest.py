import json
import os

import numpy as np
import pytest

# Share the eigensystem cache with the primary package's test suite so the
# desk-scale CLI runs below stay cheap.
os.environ.setdefault(
    "ISOMCTL_CACHE_DIR",
    os.path.join(os.path.dirname(__file__), "..", "..", "tests", ".cache"))

SMALL_RUN = ["--set", "model.n_basis=80",
             "--set", "field.amplitude=20",
             "--set", "field.t0=100",
             "--set", "field.dt_width=30",
             "--set", "run.t_final=500"]

GA_ARGS = ["--seed", "5",
           "--set", "ga.population=4",
           "--set", "ga.survivors=2",
           "--set", "ga.mutation_children=1",
           "--set", "ga.crossover_children=0",
           "--set", "ga.generations=1"]

OCT_ARGS = ["--set", "model.n_basis=80",
            "--set", "run.t_final=300",
            "--set", "oct.t_horizon=20",
            "--set", "oct.dt=0.02",
            "--set", "oct.alpha=1e-5",
            "--set", "oct.iterations=2"]


@pytest.fixture(scope="session")
def headline_runs(tmp_path_factory):
    """Desk-scale stand-ins for the four headline optimization runs."""
    from isomctl.cli import main

    root = tmp_path_factory.mktemp("runs")
    dirs = {}
    for mode in ("ga-max", "ga-min", "oct-max", "oct-min"):
        out = str(root / mode)
        args = (SMALL_RUN + GA_ARGS) if mode.startswith("ga") else OCT_ARGS
        code = main(["run", "--mode", mode, "--out", out, *args])
        assert code == 0, f"{mode} run failed"
        dirs[mode] = out
    return dirs
