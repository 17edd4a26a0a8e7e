"""Configuration-driven command-line frontend.

Two commands:

* ``isomctl defaults``            - print the full default JSON config
* ``isomctl run --config ...``    - execute one mode and write artifacts

Every run directory receives a ``manifest.json`` with the resolved
configuration, its hash, the seed, package versions and wall time - enough
to rerun the job exactly.  Exit codes: 0 success, 2 configuration error,
3 numerical abort (a crash dump is written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

MODES = ("eigen", "propagate", "ga-max", "ga-min", "oct-max", "oct-min",
         "spectrum")


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------
# configuration handling
# ----------------------------------------------------------------------

def default_config() -> dict:
    from dataclasses import asdict

    from .field import FieldSpec
    from .bath import BathSpec
    from .ga import GAConfig
    from .model import ModelSpec
    from .oct import OCTConfig
    from .propagator import PropagatorConfig

    field = FieldSpec().to_dict()
    field["phases"] = "zero"              # "zero" | "random" | list of 128
    ga = asdict(GAConfig())
    del ga["seed"], ga["objective"]       # owned by run.seed and the mode
    oct_cfg = asdict(OCTConfig())
    del oct_cfg["sense"]                  # owned by the mode
    return {
        "schema": 1,
        "model": asdict(ModelSpec()),
        "bath": asdict(BathSpec()),
        "field": field,
        "propagator": asdict(PropagatorConfig()),
        "ga": ga,
        "oct": oct_cfg,
        "run": {
            "mode": "propagate",
            "t_final": 20000.0,           # fs
            "out": "isomctl-out",
            "seed": None,
            "cache": "use",               # "use" | "rebuild"
            "baseline": True,             # also run the zero-phase reference
        },
    }


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides: list) -> None:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"unknown config section {p!r} in {key!r}")
            node = node[p]
        leaf = parts[-1]
        if leaf not in node:
            raise ConfigError(
                f"unknown config key {key!r}; known keys in this section: "
                f"{sorted(node)}"
            )
        node[leaf] = _coerce(raw)


def load_config(path: str | None, overrides: list, mode: str | None,
                seed: int | None, out: str | None) -> dict:
    cfg = default_config()
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path!r} is not valid JSON: {exc}")
        if user.get("schema", 1) != 1:
            raise ConfigError(f"unsupported schema {user.get('schema')!r}")
        for section, values in user.items():
            if section == "schema":
                continue
            if section not in cfg:
                raise ConfigError(f"unknown config section {section!r}")
            if not isinstance(values, dict):
                raise ConfigError(f"section {section!r} must be an object")
            for k, v in values.items():
                if k not in cfg[section]:
                    raise ConfigError(
                        f"unknown key {section}.{k}; known keys: "
                        f"{sorted(cfg[section])}"
                    )
                cfg[section][k] = v
    apply_overrides(cfg, overrides)
    if mode is not None:
        cfg["run"]["mode"] = mode
    if seed is not None:
        cfg["run"]["seed"] = seed
    if out is not None:
        cfg["run"]["out"] = out
    if cfg["run"]["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, "
                          f"got {cfg['run']['mode']!r}")
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


# ----------------------------------------------------------------------
# run context
# ----------------------------------------------------------------------

class RunContext:
    """Validated objects built lazily from the config dict."""

    def __init__(self, cfg: dict):
        from .bath import BathSpec
        from .model import ModelSpec
        from .propagator import PropagatorConfig

        self.cfg = cfg
        try:
            self.model_spec = ModelSpec(**cfg["model"])
            self.model_spec.validate()
            self.bath_spec = BathSpec(**cfg["bath"])
            self.bath_spec.validate()
            self.prop_config = PropagatorConfig(**cfg["propagator"])
            self.prop_config.validate()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc))
        self.seed = cfg["run"]["seed"]
        if self.seed is None and self._needs_seed():
            self.seed = int.from_bytes(os.urandom(4), "little")
            cfg["run"]["seed"] = self.seed
        self._es = None
        self._tensors = None

    def _needs_seed(self) -> bool:
        return (self.cfg["run"]["mode"].startswith("ga")
                or self.cfg["field"]["phases"] == "random")

    def field_spec(self):
        import numpy as np

        from .field import FieldSpec

        d = dict(self.cfg["field"])
        phases = d.pop("phases")
        if phases == "zero":
            phases = np.zeros(128)
        elif phases == "random":
            phases = np.random.default_rng(self.seed).uniform(
                0.0, 2.0 * np.pi, 128)
        else:
            phases = np.asarray(phases, dtype=float)
        try:
            return FieldSpec(phases=phases, **d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc))

    @property
    def es(self):
        if self._es is None:
            from .model import cached_eigensystem

            force = self.cfg["run"]["cache"] == "rebuild"
            self._es = cached_eigensystem(self.model_spec, force=force)
        return self._es

    @property
    def tensors(self):
        if self._tensors is None:
            from .bath import build_tensors

            self._tensors = build_tensors(self.es, self.bath_spec)
        return self._tensors

    @property
    def t_final(self) -> float:
        return float(self.cfg["run"]["t_final"])


# ----------------------------------------------------------------------
# artifact writers
# ----------------------------------------------------------------------

def _write_state_table(path: str, es) -> None:
    import csv

    from .model import LABEL_NAMES

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "energy_cm", "label", "cos_phi",
                         "ground_weight"])
        for i, e in enumerate(es.energies):
            writer.writerow([i, f"{e:.6f}", LABEL_NAMES[es.labels[i]],
                             f"{es.cos_phi[i]:.6f}",
                             f"{es.ground_weight[i]:.6f}"])


def _trajectory_outputs(ctx: RunContext, out: str, f, tr,
                        time_unit: str = "ps") -> list:
    from .field import FieldError, spectrogram
    from .report import render_run_figure

    artifacts = []
    tr.to_csv(os.path.join(out, "trajectory.csv"))
    artifacts.append("trajectory.csv")
    f.to_csv(os.path.join(out, "field.csv"))
    artifacts.append("field.csv")
    spec = None
    try:
        window = min(150.0, (f.times[-1] - f.times[0]) / 3.0)
        spec = spectrogram(f, window_fwhm=window)
        spec.to_csv(os.path.join(out, "spectrogram.csv"))
        artifacts.append("spectrogram.csv")
    except FieldError:
        pass
    render_run_figure(os.path.join(out, "run_figure.png"), f, spec, tr,
                      time_unit=time_unit)
    artifacts.append("run_figure.png")
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(tr.summary(), fh, indent=1)
    artifacts.append("summary.json")
    return artifacts


def _synthesized_field(ctx: RunContext):
    import numpy as np

    from .field import synthesize

    fspec = ctx.field_spec()
    eps = ctx.prop_config.eps_field_rel * fspec.amplitude
    end = min(fspec.support_end(eps), ctx.t_final)
    half = ctx.prop_config.dt / 2.0
    grid = np.arange(0.0, end + half, half)
    return synthesize(fspec, grid), end


# ----------------------------------------------------------------------
# modes
# ----------------------------------------------------------------------

def mode_eigen(ctx: RunContext, out: str) -> list:
    es = ctx.es
    _write_state_table(os.path.join(out, "state_table.csv"), es)
    counts = {name: int((es.labels == code).sum())
              for code, name in enumerate(("TRANS", "CIS", "EXCITED"))}
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump({"n_states": len(es.energies), "counts": counts,
                   "ground_energy_cm": float(es.energies[0])}, fh, indent=1)
    return ["state_table.csv", "summary.json"]


def mode_spectrum(ctx: RunContext, out: str) -> list:
    from .field import spectrogram
    from .report import render_run_figure
    from .propagator import TrajectoryRecord
    import numpy as np

    f, _ = _synthesized_field(ctx)
    f.to_csv(os.path.join(out, "field.csv"))
    spec = spectrogram(f)
    spec.to_csv(os.path.join(out, "spectrogram.csv"))
    # field-only figure: reuse the run layout with an empty trajectory
    tr = TrajectoryRecord(times=np.array([f.times[0], f.times[-1]]),
                          p_trans=np.zeros(2), p_cis=np.zeros(2),
                          p_e=np.zeros(2), coherence_norm=np.zeros(2),
                          field=np.zeros(2))
    render_run_figure(os.path.join(out, "run_figure.png"), f, spec, tr)
    return ["field.csv", "spectrogram.csv", "run_figure.png"]


def mode_propagate(ctx: RunContext, out: str) -> list:
    from .field import pulse_area
    from .propagator import Propagator, thermal_state

    f, field_end = _synthesized_field(ctx)
    prop = Propagator(ctx.es, ctx.tensors, ctx.prop_config)
    rho0 = thermal_state(ctx.es, ctx.bath_spec.temperature)
    area = pulse_area(f, ctx.model_spec.mu_ge)
    tr = prop.propagate(rho0, f, ctx.t_final, pulse_area=area,
                        field_end=field_end)
    return _trajectory_outputs(ctx, out, f, tr)


def mode_ga(ctx: RunContext, out: str, sense: str) -> list:
    from . import ga as ga_mod
    from .ga import EvaluationContext, GAConfig
    from .propagator import CIS_OVER_AREA, MINUS_CIS_OVER_AREA
    from .report import render_fitness_figure

    objective = CIS_OVER_AREA if sense == "max" else MINUS_CIS_OVER_AREA
    try:
        ga_cfg = GAConfig(seed=ctx.seed, objective=objective,
                          **ctx.cfg["ga"])
        ga_cfg.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))
    evaluator = EvaluationContext(
        es=ctx.es, tensors=ctx.tensors, base_field=ctx.field_spec(),
        prop_config=ctx.prop_config, t_final=ctx.t_final,
        objective=objective)
    report = ga_mod.run(ga_cfg, evaluator, out)
    artifacts = ["fitness_trace.csv", "best_genome.json", "ga_checkpoint.npz"]

    render_fitness_figure(os.path.join(out, "fitness_figure.png"),
                          report.trace)
    artifacts.append("fitness_figure.png")

    best_tr = evaluator.trajectory(report.best_genome)
    from .field import synthesize
    from dataclasses import replace
    best_field = synthesize(replace(evaluator.base_field,
                                    phases=report.best_genome),
                            evaluator._grid)
    artifacts += _trajectory_outputs(ctx, out, best_field, best_tr)

    if ctx.cfg["run"]["baseline"]:
        import numpy as np

        from .propagator import objective as objective_fn

        base_tr = evaluator.trajectory(np.zeros(128))
        baseline = objective_fn(base_tr, objective)
        with open(os.path.join(out, "baseline.json"), "w") as fh:
            json.dump({"objective": baseline,
                       "final_cis": base_tr.final_cis,
                       "pulse_area": base_tr.pulse_area,
                       "best_over_baseline": (report.best_fitness / baseline
                                              if baseline else None)},
                      fh, indent=1)
        artifacts.append("baseline.json")
    return artifacts


def mode_oct(ctx: RunContext, out: str, sense: str) -> list:
    from .oct import OCTConfig, optimize
    from .propagator import Propagator, PropagatorConfig, thermal_state
    from .report import render_convergence_figure

    try:
        oct_cfg = OCTConfig(sense=sense, t_final=ctx.t_final,
                            **{k: v for k, v in ctx.cfg["oct"].items()
                               if k != "t_final"})
        oct_cfg.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))
    report = optimize(ctx.es, ctx.tensors, oct_cfg)
    report.write(out)
    artifacts = ["j_history.csv", "field.csv"]
    render_convergence_figure(os.path.join(out, "convergence_figure.png"),
                              report.j_history)
    artifacts.append("convergence_figure.png")

    # trajectory of the converged field over the full horizon
    prop_cfg = PropagatorConfig(dt=oct_cfg.dt, scheme="split",
                                stride_pulse=min(10.0, oct_cfg.t_horizon / 50))
    prop = Propagator(ctx.es, ctx.tensors, prop_cfg)
    rho0 = thermal_state(ctx.es, ctx.bath_spec.temperature)
    f = report.field.to_sampled()
    tr = prop.propagate(rho0, f, oct_cfg.t_final,
                        field_end=oct_cfg.t_horizon)
    artifacts += _trajectory_outputs(ctx, out, f, tr, time_unit="fs")
    return artifacts


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="isomctl",
        description="Simulate and optimize dissipative quantum control of "
                    "a 1D photoisomerization model.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("defaults", help="print the full default JSON config")
    run_p = sub.add_parser("run", help="execute one configured run")
    run_p.add_argument("--config", default=None, help="JSON config path")
    run_p.add_argument("--mode", default=None, choices=MODES)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--threads", type=int, default=None,
                       help="cap BLAS/OpenMP threads")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE", dest="overrides",
                       help="override a config value (repeatable)")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv if argv is not None else sys.argv[1:])
    if args.command == "defaults":
        json.dump(default_config(), sys.stdout, indent=1)
        sys.stdout.write("\n")
        return 0

    if args.threads is not None:
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    t_start = time.time()
    try:
        cfg = load_config(args.config, args.overrides, args.mode, args.seed,
                          args.out)
        ctx = RunContext(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = cfg["run"]["out"]
    os.makedirs(out, exist_ok=True)
    mode = cfg["run"]["mode"]
    from .field import FieldError
    from .model import ModelError
    from .oct import OCTError
    from .propagator import PropagationError
    try:
        if mode == "eigen":
            artifacts = mode_eigen(ctx, out)
        elif mode == "spectrum":
            artifacts = mode_spectrum(ctx, out)
        elif mode == "propagate":
            artifacts = mode_propagate(ctx, out)
        elif mode in ("ga-max", "ga-min"):
            artifacts = mode_ga(ctx, out, mode.split("-")[1])
        else:
            artifacts = mode_oct(ctx, out, mode.split("-")[1])
    except (ConfigError, ModelError, FieldError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PropagationError, OCTError) as exc:
        dump = os.path.join(out, "crash_dump.json")
        with open(dump, "w") as fh:
            json.dump({"error": str(exc), "mode": mode, "config": cfg},
                      fh, indent=1)
        print(f"numerical abort: {exc}\ndiagnostics: {dump}",
              file=sys.stderr)
        return EXIT_NUMERICAL

    manifest = {
        "schema": 1,
        "mode": mode,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seed": ctx.seed,
        "versions": _versions(),
        "wall_time_s": round(time.time() - t_start, 3),
        "artifacts": artifacts,
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
    print(f"{mode}: wrote {len(artifacts) + 1} artifacts to {out} "
          f"in {manifest['wall_time_s']} s")
    return 0


def _versions() -> dict:
    import numpy
    import scipy

    from . import __version__

    return {"isomctl": __version__, "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0]}


if __name__ == "__main__":
    sys.exit(main())
