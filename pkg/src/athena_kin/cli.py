"""Command-line interface: ``athena-kin <subcommand> ...``.

Angles are degrees on the command line and in text output; everything inside
the package is radians. Exit codes:

    0  success
    1  usage or configuration error (also nonpositive deflection)
    2  unreachable pose, no q3 root in range, joint-limit violation
    3  forward kinematics did not converge / singular Jacobian
    4  file I/O failure
    5  grid mismatch in ``compare``
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .athena1 import fk_a1, ik_a1, residuals_a1
from .athena2 import fk_a2, ik_a2, residuals_a2
from .common import Arch, JointVector, default_seed
from .config import VARIANTS, default_config_text, parse_config
from .errors import (
    ConfigError,
    ExportFormatError,
    GridMismatchError,
    KinematicsError,
    NoConvergenceError,
    SingularJacobianError,
    StiffnessError,
)
from .jacobian import DEFAULT_THRESHOLD, singularity_scan
from .rcm import TaskPose, pose_to_tip, tip_to_pose
from .stiffness import (
    format_report,
    lumped_tip_stiffness,
    stiffness_from_deflection,
    stiffness_report,
)
from .workspace import (
    EXPORT_FORMATS,
    FRAMES,
    GridSpec,
    compare,
    export,
    load_result_json,
    read_csv,
    result_to_dict,
    sweep,
    synthetic_result,
    write_plot_data,
)

ENV_CONFIG = "ATHENA_KIN_CONFIG"
RESIDUAL_TOL = 1e-9

EXIT_OK, EXIT_CONFIG, EXIT_UNREACHABLE, EXIT_NO_CONVERGENCE, EXIT_IO, EXIT_GRID = range(6)


class CliError(Exception):
    def __init__(self, message: str, code: int, reason: str | None = None):
        super().__init__(message)
        self.code = code
        self.reason = reason


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _number(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"number must be finite: {text!r}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


GLOBAL_DEFAULTS = {
    "config": None,
    "arch": "athena1",
    "variant": None,
    "branch": "+",
    "a2_root": None,
    "workers": 1,
    "json": False,
    "manifest": None,
    "lenient": False,
}


def _global_flags(parser: argparse.ArgumentParser) -> None:
    # SUPPRESS keeps a flag given before the subcommand from being reset by the subparser.
    S = argparse.SUPPRESS
    parser.add_argument("--config", metavar="PATH", default=S, help=f"configuration file (fallback: ${ENV_CONFIG})")
    parser.add_argument("--arch", choices=[a.value for a in Arch], default=S, help="architecture (default athena1)")
    parser.add_argument("--variant", choices=VARIANTS, default=S, help="chain-coordinate variant (overrides config)")
    parser.add_argument("--branch", choices=["+", "-"], default=S, help="sign of d in the chain solution (default +)")
    parser.add_argument("--a2-root", dest="a2_root", choices=["nearest", "other"], default=S,
                        help="ATHENA-2 q3 root when two lie in range")
    parser.add_argument("--workers", type=_positive_int, default=S, help="worker processes for sweeps and scans")
    parser.add_argument("--json", action="store_true", default=S, help="machine-readable output")
    parser.add_argument("--manifest", metavar="PATH", default=S, help="write a run manifest (JSON) to PATH")
    parser.add_argument("--lenient", action="store_true", default=S, help="ignore unknown configuration keys")


def _grid_flags(parser: argparse.ArgumentParser, step: float = 2.0) -> None:
    g = GridSpec.default()
    parser.add_argument("--x-range", nargs=2, type=_number, metavar=("LO", "HI"), default=list(g.x_range))
    parser.add_argument("--y-range", nargs=2, type=_number, metavar=("LO", "HI"), default=list(g.y_range))
    parser.add_argument("--z-range", nargs=2, type=_number, metavar=("LO", "HI"), default=list(g.z_range))
    parser.add_argument("--step", type=_number, default=step, help=f"grid increment in mm (default {step:g})")
    parser.add_argument("--frame", choices=FRAMES, default="rcm", help="frame the grid ranges are expressed in")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="athena-kin", description="Kinematics and workspace analysis for ATHENA-1/ATHENA-2.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_flags(p)
        return p

    p = add("ik", "inverse kinematics of a task pose")
    p.add_argument("psi", type=_number, help="azimuth, deg")
    p.add_argument("theta", type=_number, help="polar angle, deg")
    p.add_argument("phi", type=_number, help="tip roll, deg")
    p.add_argument("l_ins", type=_number, help="insertion depth, mm")
    p.add_argument("--verify", action="store_true", help="print the residuals of the solution")
    p.add_argument("--no-limits", action="store_true", help="skip joint and insertion limit checks")

    p = add("fk", "forward kinematics of a joint vector")
    p.add_argument("q1", type=_number, help="mm")
    p.add_argument("q2", type=_number, help="mm")
    p.add_argument("q3", type=_number, help="mm (athena1) or deg (athena2)")
    p.add_argument("q4", type=_number, help="deg")
    p.add_argument("--seed", nargs=3, type=_number, metavar=("PSI", "THETA", "L_INS"),
                   help="starting pose (deg, deg, mm); picks the assembly mode")
    p.add_argument("--verify", action="store_true", help="print the residuals of the solution")

    p = add("workspace", "sweep the Cartesian grid and count reachable points")
    _grid_flags(p)
    p.add_argument("--count-only", action="store_true", help="report the candidate count without classifying")
    p.add_argument("--format", dest="formats", action="append", choices=EXPORT_FORMATS, default=[],
                   help="export format; repeatable")
    p.add_argument("--output", metavar="BASE", help="export to BASE.<format>")
    p.add_argument("--valid-only", action="store_true", help="store valid points only (default)")
    p.add_argument("--all-records", action="store_true", help="store every classified point")
    p.add_argument("--include-points", action="store_true", help="add the valid points to JSON exports")
    p.add_argument("--plot-data", metavar="DIR", help="write per-slice CSV files of valid points")
    p.add_argument("--slice-axis", choices=["x", "y", "z"], default="y", help="slicing axis for --plot-data")

    p = add("compare", "compare the valid counts of two sweeps")
    p.add_argument("inputs", nargs="*", metavar="RESULT", help="two JSON or CSV sweep exports")
    p.add_argument("--both", action="store_true", help="run both architectures on the grid given by the grid flags")
    p.add_argument("--counts", nargs=2, type=int, metavar=("A", "B"), help="compare two externally given counts")
    _grid_flags(p)

    p = add("singularity", "Jacobian determinant scan over the valid points of a sweep")
    p.add_argument("--input", metavar="CSV", help="sweep CSV export with joints (default: run a sweep)")
    p.add_argument("--threshold", type=_number, default=DEFAULT_THRESHOLD)
    p.add_argument("--stride", type=_positive_int, default=1, help="evaluate every N-th valid point")
    _grid_flags(p, step=20.0)

    p = add("stiffness", "tip stiffness report")
    p.add_argument("--from-deflection", nargs=2, type=_number, metavar=("F", "DELTA"),
                   help="print K = F / delta (N, mm)")
    p.add_argument("--pose", nargs=4, type=_number, metavar=("PSI", "THETA", "PHI", "L_INS"),
                   help="add lumped-model estimates at this pose (deg, mm)")
    return parser


# --- helpers ----------------------------------------------------------------


def _resolve_config(args):
    path = args.config or os.environ.get(ENV_CONFIG)
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot read configuration {path}: {exc}", EXIT_CONFIG) from exc
    else:
        path, text = "<default>", default_config_text()
    cfg = parse_config(text, strict=not args.lenient)
    opts = cfg.options
    if args.variant is not None:
        opts = replace(opts, variant=args.variant)
    if args.a2_root is not None:
        opts = replace(opts, a2_root=args.a2_root)
    return cfg, opts, path, text


def _branch(args) -> int:
    return 1 if args.branch == "+" else -1


def _emit(args, text: str, doc: dict) -> None:
    if args.json:
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    else:
        sys.stdout.write(text + "\n")


def _residuals(arch: Arch, q: JointVector, pose: TaskPose, geom, opts):
    fn = residuals_a1 if arch is Arch.ATHENA1 else residuals_a2
    return fn(q, pose, geom, opts)


def _residual_lines(res) -> tuple[str, dict]:
    scaled = [float(v) for v in res.scaled()]
    worst = max(abs(v) for v in scaled)
    status = "ok" if worst <= RESIDUAL_TOL else "FAIL"
    text = "residuals (scaled): " + " ".join(f"f{i + 1}={v:.3e}" for i, v in enumerate(scaled))
    text += f" max={worst:.3e} {status}"
    return text, {"scaled": scaled, "max": worst, "ok": worst <= RESIDUAL_TOL}


def _joint_text(arch: Arch, q: JointVector) -> str:
    q3 = f"{q.q3:.9f} mm" if arch is Arch.ATHENA1 else f"{math.degrees(q.q3):.9f} deg"
    return "\n".join(
        [f"q1 = {q.q1:.9f} mm", f"q2 = {q.q2:.9f} mm", f"q3 = {q3}", f"q4 = {math.degrees(q.q4):.9f} deg"]
    )


def _joint_doc(arch: Arch, q: JointVector) -> dict:
    return {
        "q1_mm": q.q1,
        "q2_mm": q.q2,
        ("q3_mm" if arch is Arch.ATHENA1 else "q3_deg"): q.q3 if arch is Arch.ATHENA1 else math.degrees(q.q3),
        "q4_deg": math.degrees(q.q4),
    }


def _grid(args) -> GridSpec:
    return GridSpec(tuple(args.x_range), tuple(args.y_range), tuple(args.z_range), args.step)


# --- subcommands ------------------------------------------------------------


def cmd_ik(args, cfg, opts) -> int:
    arch = Arch(args.arch)
    geom = cfg.geometry
    limits = None if args.no_limits else cfg.limits
    pose = TaskPose(math.radians(args.psi), math.radians(args.theta), math.radians(args.phi), args.l_ins)
    if limits is not None:
        tip_to_pose(pose_to_tip(pose, geom), pose.phi, geom, limits)  # insertion / degenerate checks
    ik = ik_a1 if arch is Arch.ATHENA1 else ik_a2
    q = ik(pose, geom, limits, _branch(args), opts)
    text = f"arch={arch.value} branch={args.branch} variant={opts.variant}\n" + _joint_text(arch, q)
    doc = {"arch": arch.value, "branch": args.branch, "variant": opts.variant, "joints": _joint_doc(arch, q)}
    if args.verify:
        line, rdoc = _residual_lines(_residuals(arch, q, pose, geom, opts))
        text += "\n" + line
        doc["residuals"] = rdoc
    _emit(args, text, doc)
    return EXIT_OK


def cmd_fk(args, cfg, opts) -> int:
    arch = Arch(args.arch)
    geom = cfg.geometry
    q3 = args.q3 if arch is Arch.ATHENA1 else math.radians(args.q3)
    q = JointVector(args.q1, args.q2, q3, math.radians(args.q4), arch)
    if args.seed:
        seed = TaskPose(math.radians(args.seed[0]), math.radians(args.seed[1]), 0.0, args.seed[2])
    else:
        seed = default_seed(geom, cfg.limits)
    fk = fk_a1 if arch is Arch.ATHENA1 else fk_a2
    pose = fk(q, geom, seed=seed, limits=cfg.limits, options=opts)
    text = "\n".join(
        [
            f"arch={arch.value} variant={opts.variant}",
            f"psi = {math.degrees(pose.psi):.9f} deg",
            f"theta = {math.degrees(pose.theta):.9f} deg",
            f"phi = {math.degrees(pose.phi):.9f} deg",
            f"l_ins = {pose.l_ins:.9f} mm",
        ]
    )
    doc = {
        "arch": arch.value,
        "variant": opts.variant,
        "pose": {
            "psi_deg": math.degrees(pose.psi),
            "theta_deg": math.degrees(pose.theta),
            "phi_deg": math.degrees(pose.phi),
            "l_ins_mm": pose.l_ins,
        },
    }
    if args.verify:
        line, rdoc = _residual_lines(_residuals(arch, q, pose, geom, opts))
        text += "\n" + line
        doc["residuals"] = rdoc
    _emit(args, text, doc)
    return EXIT_OK


def _summary(result) -> str:
    ratio = 100.0 * result.valid_count / result.total_candidates if result.total_candidates else 0.0
    return f"arch={result.arch.value} total={result.total_candidates} valid={result.valid_count} ratio={ratio:.4f}%"


def cmd_workspace(args, cfg, opts) -> int:
    arch = Arch(args.arch)
    spec = _grid(args)
    if args.count_only:
        _emit(args, f"arch={arch.value} total={spec.total}", {"arch": arch.value, "spec": spec.to_dict(),
                                                              "total_candidates": spec.total})
        return EXIT_OK
    store = "all" if args.all_records else "valid"
    result = sweep(arch, spec, cfg.geometry, cfg.limits, opts, _branch(args), args.workers, store, args.frame)
    written = []
    if args.formats:
        base = args.output or f"workspace_{arch.value}"
        for fmt in args.formats:
            path = f"{base}.{fmt}"
            export(result, fmt, path, include_points=args.include_points)
            written.append(path)
    if args.plot_data:
        written.extend(str(p) for p in write_plot_data(result, args.plot_data, args.slice_axis))
    doc = result_to_dict(result)
    doc["files"] = written
    _emit(args, _summary(result), doc)
    return EXIT_OK


def _load_result(path: str):
    if path.lower().endswith(".csv"):
        return read_csv(path)
    return load_result_json(path)


def cmd_compare(args, cfg, opts) -> int:
    if args.counts:
        spec = _grid(args)
        total = max(spec.total, *args.counts)
        a = synthetic_result(Arch.ATHENA1, spec, args.counts[0], total)
        b = synthetic_result(Arch.ATHENA2, spec, args.counts[1], total)
    elif args.both:
        spec = _grid(args)
        a, b = (
            sweep(arch, spec, cfg.geometry, cfg.limits, opts, _branch(args), args.workers, "none", args.frame)
            for arch in (Arch.ATHENA1, Arch.ATHENA2)
        )
    elif len(args.inputs) == 2:
        a, b = (_load_result(p) for p in args.inputs)
    else:
        raise CliError("compare needs two result files, --both or --counts A B", EXIT_CONFIG)
    report = compare(a, b)
    _emit(args, report.format_text(), report.to_dict())
    return EXIT_OK


def cmd_singularity(args, cfg, opts) -> int:
    arch = Arch(args.arch)
    if args.input:
        result = read_csv(args.input)
        arch = result.arch
    else:
        result = sweep(arch, _grid(args), cfg.geometry, cfg.limits, opts, _branch(args), args.workers)
    report = singularity_scan(result, cfg.geometry, args.threshold, args.stride, opts, args.workers)
    _emit(args, report.format_text(), report.to_dict())
    return EXIT_OK


def cmd_stiffness(args, cfg, opts) -> int:
    if args.from_deflection:
        force, delta = args.from_deflection
        k = stiffness_from_deflection(force, delta)
        _emit(args, f"K = {k:.2f} N/mm", {"force_n": force, "deflection_mm": delta, "stiffness_n_per_mm": k})
        return EXIT_OK
    estimates, skipped = [], []
    if args.pose:
        psi, theta, phi, l_ins = args.pose
        pose = TaskPose(math.radians(psi), math.radians(theta), math.radians(phi), l_ins)
        for arch, ik in ((Arch.ATHENA1, ik_a1), (Arch.ATHENA2, ik_a2)):
            ks = cfg.joint_stiffness.get(arch.value)
            if ks is None:
                skipped.append(f"{arch.value}: no joint stiffness configured")
                continue
            try:
                q = ik(pose, cfg.geometry, cfg.limits, _branch(args), opts)
                estimates.append(lumped_tip_stiffness(arch, pose, q, cfg.geometry, ks, opts, cfg.stiffness_label))
            except KinematicsError as exc:
                skipped.append(f"{arch.value}: {exc.reason}")
    report = stiffness_report(estimates=estimates)
    report["notes"].extend(f"skipped {s}" for s in skipped)
    _emit(args, format_report(report), report)
    return EXIT_OK


COMMANDS = {
    "ik": cmd_ik,
    "fk": cmd_fk,
    "workspace": cmd_workspace,
    "compare": cmd_compare,
    "singularity": cmd_singularity,
    "stiffness": cmd_stiffness,
}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, CliError):
        return exc.code
    if isinstance(exc, GridMismatchError):
        return EXIT_GRID
    if isinstance(exc, (ConfigError, StiffnessError, ExportFormatError)):
        return EXIT_CONFIG
    if isinstance(exc, (NoConvergenceError, SingularJacobianError)):
        return EXIT_NO_CONVERGENCE
    if isinstance(exc, KinematicsError):
        return EXIT_UNREACHABLE
    if isinstance(exc, OSError):
        return EXIT_IO
    raise exc


def _write_manifest(path, args, config_path, config_text, code, started) -> None:
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "manifest"}
    doc = {
        "subcommand": args.command,
        "config_path": config_path,
        "config_sha256": hashlib.sha256(config_text.encode("utf-8")).hexdigest() if config_text else None,
        "flags": flags,
        "version": __version__,
        "exit_code": code,
        "duration_s": time.perf_counter() - started,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, default=str)
        fh.write("\n")


def main(argv=None) -> int:
    started = time.perf_counter()
    args = build_parser().parse_args(argv)
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    config_path = config_text = None
    try:
        cfg, opts, config_path, config_text = _resolve_config(args)
        code = COMMANDS[args.command](args, cfg, opts)
    except Exception as exc:  # mapped to exit codes; unknown errors propagate
        code = _exit_code(exc)
        reason = getattr(exc, "reason", None)
        if isinstance(exc, ConfigError) and exc.field:
            reason = f"field {exc.field}"
        if args.json:
            sys.stdout.write(json.dumps({"error": str(exc), "reason": reason, "exit_code": code}) + "\n")
        prefix = f"{reason}: " if reason else ""
        sys.stderr.write(f"athena-kin: error: {prefix}{exc}\n")
    if args.manifest:
        try:
            _write_manifest(args.manifest, args, config_path, config_text, code, started)
        except OSError as exc:
            sys.stderr.write(f"athena-kin: error: cannot write manifest: {exc}\n")
            code = code or EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
