"""``drivefit`` command line.

Exit codes: 0 success, 2 input error (bad config, missing file, shape
mismatch), 3 numerical failure (diverged rollout, optimizer found no finite
loss).
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, config as cfgmod
from .analysis import frequency, inertia
from .dynamics import rollout
from .energy import EnergyError, EnergyTrial, average_power, cot_decompose, power_series
from .excitation import ChirpSpec, ExcitationError, StepSpec, chirp, random_steps
from .identify.cmaes import OptimizerError
from .identify.fit import FitConfig, cma_es_fit, delta_phase_metrics, loss, phase_deltas
from .identify.params import ParamVector
from .model import ModelError
from .trajectory import Trajectory, TrajectoryError, read_csv, write_csv

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

EPILOG = "exit codes: 0 ok, 2 input error, 3 numerical failure"


class InputError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config_paths: list = field(default_factory=list)
    input_paths: list = field(default_factory=list)
    output_path: Optional[str] = None
    seed: Optional[int] = None
    tool_version: str = __version__

    def as_dict(self) -> dict:
        return asdict(self)

    def comment_lines(self) -> list[str]:
        return ["manifest " + json.dumps(self.as_dict(), sort_keys=True)]


# output helpers ----------------------------------------------------------------

def write_atomic(path, text: str) -> None:
    """Write ``text`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def trajectory_text(traj: Trajectory, manifest: RunManifest) -> str:
    buf = io.StringIO()
    write_csv(traj, buf, manifest.comment_lines())
    return buf.getvalue()


def table_text(header: list[str], rows: np.ndarray, manifest: RunManifest) -> str:
    buf = io.StringIO()
    for line in manifest.comment_lines():
        buf.write(f"# {line}\n")
    buf.write(",".join(header) + "\n")
    if len(rows):
        np.savetxt(buf, np.asarray(rows, dtype=float), delimiter=",", fmt="%.17g")
    return buf.getvalue()


def sibling(out: str, suffix: str) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + suffix))


# input helpers -------------------------------------------------------------------

def load_configs(paths) -> cfgmod.Config:
    return cfgmod.merge(cfgmod.load(p) for p in paths)


def load_data(path) -> Trajectory:
    if not os.path.exists(path):
        raise InputError(f"{path}: no such file")
    return read_csv(path)


def _check_joints(model, traj: Trajectory, path: str) -> None:
    if traj.n_joints != model.n_joints:
        raise InputError(f"{path}: data has {traj.n_joints} joints, model has {model.n_joints}")


# commands ------------------------------------------------------------------------

def cmd_gen_excite(args) -> int:
    cfg = load_configs(args.spec + (args.model or []))
    if args.joints is not None:
        n = args.joints
    elif "model" in cfg or "robot" in cfg:
        n = cfgmod.build_model(cfg).n_joints
    else:
        raise InputError("give --joints or a model config to set the joint count")
    try:
        if args.kind == "chirp":
            kw = dict(cfg.section("chirp"))
            offsets = kw.pop("phase_offsets", None)
            traj = chirp(ChirpSpec(**kw), n, offsets)
        else:
            kw = dict(cfg.section("steps"))
            if args.seed is not None:
                kw["seed"] = args.seed
            traj = random_steps(StepSpec(**kw), n)
    except TypeError as exc:
        raise InputError(f"{cfg.path}: {exc}") from None
    manifest = RunManifest("gen-excite", list(args.spec) + list(args.model or []), [], args.out, args.seed)
    emit(trajectory_text(traj, manifest), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_configs(args.model)
    model = cfgmod.build_model(cfg)
    sim = cfgmod.build_sim(cfg)
    targets = load_data(args.targets)
    _check_joints(model, targets, args.targets)
    out = rollout(model, targets, sim)
    manifest = RunManifest("simulate", list(args.model), [args.targets], args.out, args.seed)
    emit(trajectory_text(out, manifest), args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = load_configs(args.model + (args.bounds or []) + (args.fit or []))
    model = cfgmod.build_model(cfg)
    sim = cfgmod.build_sim(cfg)
    data = [load_data(p) for p in args.data]
    for p, d in zip(args.data, data):
        _check_joints(model, d, p)
    try:
        bounds = ParamVector.from_model(model, cfgmod.build_bounds(cfg))
        fit_kw = dict(cfg.get("fit", {}))
        if args.seed is not None:
            fit_kw["seed"] = args.seed
        fcfg = FitConfig(**fit_kw)
    except TypeError as exc:
        raise InputError(f"{cfg.path}: {exc}") from None
    result = cma_es_fit(model, data, bounds, fcfg, sim, jobs=args.jobs)
    config_paths = list(args.model) + list(args.bounds or []) + list(args.fit or [])
    manifest = RunManifest("fit", config_paths, list(args.data), args.out, fcfg.seed)
    doc = result.to_dict(model)
    doc["manifest"] = manifest.as_dict()
    emit(dump_json(doc), args.out)
    if args.out and args.out != "-":
        trace = np.column_stack([np.arange(len(result.score_trace)), result.score_trace])
        text = table_text(["iteration", "best_loss"], trace, manifest)
        write_atomic(sibling(args.out, ".trace.csv"), text)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = load_configs(args.model)
    model = cfgmod.build_model(cfg)
    sim = cfgmod.build_sim(cfg)
    data = load_data(args.data)
    _check_joints(model, data, args.data)
    simulated = rollout(model, data, sim)
    metrics = delta_phase_metrics(data, simulated)
    manifest = RunManifest("evaluate", list(args.model), [args.data], args.out, args.seed)
    doc = {
        "loss": loss(data, simulated),
        "joints": metrics.to_dict(model.names()),
        "manifest": manifest.as_dict(),
    }
    emit(dump_json(doc), args.out)
    if args.out and args.out != "-":
        dq, dqd = phase_deltas(data, simulated)
        n = model.n_joints
        header = ["t"] + [f"dq{i}" for i in range(n)] + [f"dqd{i}" for i in range(n)]
        write_atomic(sibling(args.out, ".delta.csv"), table_text(header, np.column_stack([data.t, dq, dqd]), manifest))
    return EXIT_OK


def cmd_bode(args) -> int:
    cfg = load_configs(args.model)
    model = cfgmod.build_model(cfg)
    grid = dict(cfg.get("bode", {}))
    f0 = args.f_start if args.f_start is not None else grid.get("f_start", 0.1)
    f1 = args.f_end if args.f_end is not None else grid.get("f_end", 20.0)
    points = args.points if args.points is not None else grid.get("points", 200)
    joint = args.joint if args.joint is not None else grid.get("joint", 0)
    if not 0 <= joint < model.n_joints:
        raise InputError(f"joint index {joint} out of range for {model.n_joints} joints")
    freqs = frequency.log_grid(f0, f1, points)
    resp = frequency.bode(model.joints[joint], model.gains[joint], model.command_delay, freqs)
    manifest = RunManifest("bode", list(args.model), [], args.out, args.seed)
    emit(table_text(["f_hz", "mag_db", "phase_deg"], resp.rows(), manifest), args.out)
    return EXIT_OK


def cmd_energy_report(args) -> int:
    cfg = load_configs(args.model)
    model = cfgmod.build_model(cfg)
    data = load_data(args.data)
    _check_joints(model, data, args.data)
    if data.tau is None:
        raise InputError(f"{args.data}: energy report needs torque columns")
    if model.motors is None:
        raise InputError(f"{cfg.path}: energy report needs motor parameters")
    regen = {m.regen_coefficient for m in model.motors}
    if len(regen) != 1:
        raise InputError(f"{cfg.path}: motors must share one regen_coefficient")
    p = power_series(data.tau, data.qd, model.motors, regen.pop())
    manifest = RunManifest("energy-report", list(args.model), [args.data], args.out, args.seed)
    rows = np.column_stack([data.t, p])
    emit(table_text(["t", "p_electrical", "p_mechanical", "p_total"], rows, manifest), args.out)
    return EXIT_OK


def _trial(path) -> EnergyTrial:
    cfg = cfgmod.load(path)
    try:
        return EnergyTrial(**cfg.section("trial"))
    except TypeError as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_cot(args) -> int:
    track, rest, off = _trial(args.track), _trial(args.rest), _trial(args.off)
    br = cot_decompose(track, rest, off)
    manifest = RunManifest("cot", [args.track, args.rest, args.off], [], args.out, args.seed)
    doc = br.as_dict()
    doc.update(p_rest=average_power(rest), p_off=average_power(off), p_track=average_power(track))
    doc["manifest"] = manifest.as_dict()
    emit(dump_json(doc), args.out)
    return EXIT_OK


def cmd_inertia(args) -> int:
    cfg = cfgmod.load(args.config)
    manifest = RunManifest(f"inertia {args.case}", [args.config], [], args.out, args.seed)
    try:
        if args.case == "pendulum":
            meas = inertia.PendulumMeasurement(**cfg.section("pendulum"))
            i_p, i_com, sigma = inertia.pendulum_inertia(meas)
            doc = {"inertia_pivot": i_p, "inertia_com": i_com, "sigma_inertia_com": sigma}
        elif args.case == "reduce":
            comps = cfg.section("reduce").get("components", [])
            doc = {"reduced_inertia": inertia.reduced_inertia_sum((c["inertia"], c["ratio"]) for c in comps)}
        else:
            kw = dict(cfg.section("leg"))
            legs = kw.pop("legs", 2)
            leg = inertia.PlanarLegModel(**kw)
            if not args.angle:
                raise InputError("give at least one --angle")
            if args.case == "vertical":
                vals = [inertia.effective_inertia_vertical(leg, a, legs) for a in args.angle]
                doc = {"knee_angle": args.angle, "effective_inertia": vals}
            else:
                vals = [inertia.effective_inertia_horizontal(leg, a, args.branch, legs) for a in args.angle]
                doc = {"hip_angle": args.angle, "branch": args.branch, "effective_inertia": vals}
    except TypeError as exc:
        raise InputError(f"{args.config}: {exc}") from None
    doc["manifest"] = manifest.as_dict()
    emit(dump_json(doc), args.out)
    return EXIT_OK


# parser --------------------------------------------------------------------------

def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="random seed (overrides config)")
    parser.add_argument("--jobs", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="worker threads for population evaluation (fit only)")
    parser.add_argument("--out", default=default, help="output path; stdout when omitted")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drivefit", description="Joint drive identification and energy analysis.",
                                     epilog=EPILOG)
    parser.add_argument("--version", action="version", version=f"drivefit {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=EPILOG)
        _common(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("gen-excite", cmd_gen_excite, "generate chirp or random-step targets as trajectory CSV")
    p.add_argument("--kind", choices=["chirp", "steps"], required=True, help="excitation type")
    p.add_argument("--spec", nargs="+", required=True, help="config(s) with a chirp or steps section")
    p.add_argument("--model", nargs="+", help="model config giving the joint count")
    p.add_argument("--joints", type=int, help="joint count when no model config is given")

    p = add("simulate", cmd_simulate, "replay recorded targets on a model")
    p.add_argument("--model", nargs="+", required=True, help="model config(s)")
    p.add_argument("--targets", required=True, help="trajectory CSV whose targets are replayed")

    p = add("fit", cmd_fit, "identify joint parameters and delay with CMA-ES; writes JSON and <out>.trace.csv")
    p.add_argument("--model", nargs="+", required=True, help="base model config(s)")
    p.add_argument("--data", nargs="+", required=True, help="recorded trajectory CSV(s)")
    p.add_argument("--bounds", nargs="+", help="config(s) with a bounds section")
    p.add_argument("--fit", nargs="+", help="config(s) with a fit section")

    p = add("evaluate", cmd_evaluate, "loss and delta phase-portrait metrics; writes JSON and <out>.delta.csv")
    p.add_argument("--model", nargs="+", required=True, help="model config(s) to evaluate")
    p.add_argument("--data", required=True, help="recorded trajectory CSV")

    p = add("bode", cmd_bode, "closed-loop joint frequency response as CSV f_hz,mag_db,phase_deg")
    p.add_argument("--model", nargs="+", required=True, help="model config(s); a bode section sets grid defaults")
    p.add_argument("--joint", type=int, help="joint index (default 0)")
    p.add_argument("--f-start", type=float, help="first grid frequency in Hz (default 0.1)")
    p.add_argument("--f-end", type=float, help="last grid frequency in Hz (default 20)")
    p.add_argument("--points", type=int, help="number of log-spaced grid points (default 200)")

    p = add("energy-report", cmd_energy_report, "per-step electrical and mechanical power from a torque log")
    p.add_argument("--model", nargs="+", required=True, help="model config(s) with motor parameters")
    p.add_argument("--data", required=True, help="trajectory CSV with tau columns")

    p = add("cot", cmd_cot, "cost of transport split from track, rest and drives-off trials")
    p.add_argument("--track", required=True, help="config with the locomotion trial (needs distance and mass)")
    p.add_argument("--rest", required=True, help="config with the standing trial, drives powered")
    p.add_argument("--off", required=True, help="config with the trial with drives switched off")

    p = add("inertia", cmd_inertia, "pendulum, contact-reflected, and gear-reduced inertias")
    p.add_argument("case", choices=["pendulum", "vertical", "horizontal", "reduce"], help="which estimate to run")
    p.add_argument("--config", required=True, help="config with a pendulum, leg or reduce section")
    p.add_argument("--angle", type=float, nargs="+", help="knee (vertical) or hip (horizontal) angles, rad")
    p.add_argument("--branch", type=int, choices=[1, -1], default=1,
                   help="knee solution branch for the horizontal case (default 1)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs is None or args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except (InputError, cfgmod.ConfigError, TrajectoryError, ExcitationError, ModelError, EnergyError,
            frequency.AnalysisError, OSError) as exc:
        print(f"drivefit: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OptimizerError, FloatingPointError) as exc:
        print(f"drivefit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"drivefit: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
