"""Command-line front end: ``hybridcavity <subcommand> [options]``.

Every subcommand writes its CSV outputs and a ``<prefix>manifest.json`` into
``--out``.  Module errors are reported as a one-line JSON object on stderr
with a non-zero exit status.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
import time
import warnings
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .checks import (
    eigen_residuals,
    finite_difference_agreement,
    resolvent_agreement,
    timedomain_agreement,
    trace_identity,
)
from .errors import BistableWarning, HybridCavityError
from .magnetooptic import MODE_LABELS, selection_rule_table
from .output import RunManifest, cell, heatmap_gnuplot, spectrum_gnuplot, write_csv
from .params import IntensityConvention, PhysicalConfig, config_hash, derive_params, load_config
from .response import compute_spectrum, default_delta_grid
from .stability import stability_scan
from .steady_state import solve_steady_state
from .sweep import (
    NUMERICAL_FAILURE,
    REGIMES,
    Axis,
    axis_value,
    delay_map,
    extremal_profile,
    find_conversions,
    phase_diagram,
)

INTERRUPTED = "interrupted"
EXIT_MODULE_ERROR = 1
EXIT_INTERRUPTED = 130

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z_]*)\s*$")


# ---------------------------------------------------------------------------
# argument grammar
# ---------------------------------------------------------------------------

def _number_with_unit(text: str) -> tuple[float, str]:
    m = _NUMBER.match(text)
    if not m:
        raise ValueError(f"cannot read a number from {text!r}")
    return float(m.group(1)), m.group(2)


def parse_axis(text: str, unit: str | None = None) -> Axis:
    """``name:start:stop:count[:unit]``; start/stop may carry a unit suffix (``0.5mW``).

    ``unit`` (the ``--unit`` flag) applies when the axis text itself names none.
    """
    parts = text.split(":")
    if len(parts) not in (4, 5):
        raise ValueError(f"axis {text!r} is not name:start:stop:count[:unit]")
    name = parts[0].strip()
    start, u1 = _number_with_unit(parts[1])
    stop, u2 = _number_with_unit(parts[2])
    try:
        count = int(parts[3])
    except ValueError:
        raise ValueError(f"axis count {parts[3]!r} is not an integer") from None
    if count < 1:
        raise ValueError("axis count must be at least 1")
    named = {u for u in (u1, u2, parts[4].strip() if len(parts) == 5 else "") if u}
    if len(named) > 1:
        raise ValueError(f"conflicting units in axis {text!r}: {sorted(named)}")
    chosen = named.pop() if named else (unit or "native")
    return Axis.linspace(name, start, stop, count, chosen)


def parse_range(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range {text!r} is not start:stop:count")
    return float(parts[0]), float(parts[1]), int(parts[2])


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

class Run:
    """Collects outputs for one invocation and writes the manifest."""

    def __init__(self, args: argparse.Namespace, cfg: PhysicalConfig):
        self.args = args
        self.cfg = cfg
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.prefix = args.prefix
        self.hash = config_hash(cfg)
        self.outputs: list[str] = []
        self.t0 = time.perf_counter()
        self.interrupted = False

    def path(self, name: str) -> Path:
        return self.out / f"{self.prefix}{name}"

    def comments(self, *extra: str) -> list[str]:
        return [f"hybridcavity {__version__}", f"subcommand {self.args.command}",
                f"config_hash {self.hash}", *extra]

    def csv(self, name: str, header, rows, *extra_comments: str) -> Path:
        p = write_csv(self.path(name), header, rows, self.comments(*extra_comments))
        self.outputs.append(p.name)
        return p

    def text(self, name: str, content: str) -> Path:
        p = self.path(name)
        p.write_text(content, encoding="utf-8")
        self.outputs.append(p.name)
        return p

    def finish(self) -> Path:
        arguments = {k: v for k, v in sorted(vars(self.args).items()) if k != "func"}
        manifest = RunManifest(
            version=__version__,
            config_hash=self.hash,
            subcommand=self.args.command,
            arguments=arguments,
            wall_time_s=round(time.perf_counter() - self.t0, 3),
            outputs=list(self.outputs),
            interrupted=self.interrupted,
        )
        return manifest.write(self.path("manifest.json"))


def _config(args: argparse.Namespace) -> PhysicalConfig:
    cfg = load_config(args.config) if args.config else PhysicalConfig()
    if args.convention:
        cfg = cfg.replace(intensity_convention=IntensityConvention(args.convention))
    return cfg


def _steady(cfg: PhysicalConfig, branch: int | None = None):
    dp = derive_params(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BistableWarning)
        steady = solve_steady_state(dp, branch)
    return dp, steady


def _chunked(values: np.ndarray, size: int):
    for i in range(0, values.size, size):
        yield i, values[i:i + size]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_spectrum(args, run: Run) -> None:
    cfg = run.cfg
    if not args.with_magnon:
        cfg = cfg.replace(g_m=0.0)
    dp, steady = _steady(cfg, args.branch)
    grid = default_delta_grid(dp, args.lo, args.hi, args.points)
    spec = compute_spectrum(grid, steady, dp)
    x = grid / dp.omega_phi
    rows = zip(x, spec.eps_out.real, spec.eps_out.imag, spec.phi_t, spec.tau_g)
    name = "spectrum.csv"
    run.csv(name, ["delta_over_omega_phi", "re_eps_out", "im_eps_out", "phi_t", "tau_g_s"], rows,
            f"branch {steady.branch_index} of {steady.branch_count}",
            f"with_magnon {str(args.with_magnon).lower()}")
    if args.plot:
        run.text("spectrum.gp", spectrum_gnuplot(run.path(name).name))


def cmd_delay_map(args, run: Run) -> None:
    axis = parse_axis(args.axis, args.unit)
    dp0 = derive_params(run.cfg)
    lo, hi, n = parse_range(args.delta)
    delta = np.linspace(lo, hi, n) * dp0.omega_phi
    rows = []
    done = 0
    try:
        for _, chunk in _chunked(axis.values, max(1, args.workers) * 4):
            dm = delay_map(run.cfg, Axis(axis.name, chunk, axis.unit), delta, workers=args.workers)
            for i, v in enumerate(chunk):
                for j, d in enumerate(delta):
                    rows.append((v, d / dp0.omega_phi, cell(dm.tau[i, j], dm.reason[i, j]),
                                 int(dm.branch_count[i])))
            done += chunk.size
    except KeyboardInterrupt:
        run.interrupted = True
        for v in axis.values[done:]:
            for d in delta:
                rows.append((v, d / dp0.omega_phi, INTERRUPTED, 0))
    name = "delay_map.csv"
    run.csv(name, [f"{axis.name}[{axis.unit}]", "delta_over_omega_phi", "tau_g_s", "branch_count"], rows)
    if args.plot:
        run.text("delay_map.gp", heatmap_gnuplot(name, 2, 1, 3, "delta / omega_phi",
                                                 f"{axis.name} ({axis.unit})", "group delay", "delay_map.png"))


def cmd_phase_diagram(args, run: Run) -> None:
    g_lo, g_hi, g_n = parse_range(args.g_m)
    w_lo, w_hi, w_n = parse_range(args.omega_m)
    g_axis = Axis.linspace("g_m", g_lo, g_hi, g_n, args.g_m_unit)
    w_axis = Axis.linspace("omega_m", w_lo, w_hi, w_n, args.omega_m_unit)
    rows = []
    done = 0
    try:
        for _, chunk in _chunked(g_axis.values, max(1, args.workers)):
            pd = phase_diagram(run.cfg, Axis("g_m", chunk, g_axis.unit), w_axis,
                               half_width_ratio=args.half_width, workers=args.workers)
            for i, g in enumerate(chunk):
                for j, w in enumerate(w_axis.values):
                    r = pd.reason[i, j]
                    rows.append((g, w, cell(pd.rotation_max[i, j], r), cell(pd.rotation_min[i, j], r),
                                 cell(pd.magnon_max[i, j], r), cell(pd.magnon_min[i, j], r)))
            done += chunk.size
    except KeyboardInterrupt:
        run.interrupted = True
        for g in g_axis.values[done:]:
            for w in w_axis.values:
                rows.append((g, w) + (INTERRUPTED,) * 4)
    name = "phase_diagram.csv"
    header = [f"g_m[{g_axis.unit}]", f"omega_m[{w_axis.unit}]",
              "rotation_max_s", "rotation_min_s", "magnon_max_s", "magnon_min_s"]
    run.csv(name, header, rows)
    if args.plot:
        for k, label in enumerate(header[2:], start=3):
            run.text(f"phase_{label}.gp", heatmap_gnuplot(name, 2, 1, k, "omega_m", "g_m",
                                                          label, f"phase_{label}.png"))


def cmd_conversions(args, run: Run) -> None:
    axis = parse_axis(args.axis, args.unit)
    profile = extremal_profile(run.cfg, axis, args.half_width, workers=args.workers)
    regimes = REGIMES if args.regime == "both" else (args.regime,)
    found = []
    for regime in regimes:
        found += find_conversions(run.cfg, axis, regime, tol=args.tol, half_width_ratio=args.half_width,
                                  profile=profile)
    prof_rows = []
    for k, v in enumerate(axis.values):
        r = profile.reason[k]
        prof_rows.append((v, cell(profile.rotation_max[k], r), cell(profile.rotation_min[k], r),
                          cell(profile.magnon_max[k], r), cell(profile.magnon_min[k], r)))
    run.csv("extremal_profile.csv",
            [f"{axis.name}[{axis.unit}]", "rotation_max_s", "rotation_min_s", "magnon_max_s", "magnon_min_s"],
            prof_rows)
    rows = [(c.regime, c.value, c.direction, c.bracket[0], c.bracket[1], c.refined, c.note or "-") for c in found]
    run.csv("conversions.csv", ["regime", f"{axis.name}[{axis.unit}]", "direction", "bracket_lo", "bracket_hi",
                                "refined", "note"], rows)
    for c in found:
        flag = "" if c.refined else f"  (unrefined: {c.note})"
        print(f"{c.regime:8s} {axis.name} = {c.value:.6g} {axis.unit}  {c.direction}{flag}")
    if not found:
        print(f"no sign change of the extremal delay along {axis.name}")


def cmd_stability_scan(args, run: Run) -> None:
    axis = parse_axis(args.axis, args.unit)
    rows = []
    for v in axis.values:
        try:
            points = stability_scan(run.cfg, axis.name, [axis_value(axis.unit, v)], margin=args.margin)
        except HybridCavityError:
            rows.append((v, -1, 0, NUMERICAL_FAILURE, NUMERICAL_FAILURE, NUMERICAL_FAILURE))
            continue
        for p in points:
            rows.append((v, p.branch_index, p.branch_count, p.steady.Delta_eff, p.report.max_real,
                         p.report.stable))
    run.csv("stability_scan.csv", [f"{axis.name}[{axis.unit}]", "branch_index", "branch_count",
                                   "Delta_eff_rad_s", "max_real_rad_s", "stable"], rows)


def cmd_oracle_check(args, run: Run) -> None:
    dp, steady = _steady(run.cfg)
    grid = default_delta_grid(dp, args.lo, args.hi, args.points)
    td = np.linspace(args.lo, args.hi, args.td_points + 2)[1:-1] * dp.omega_phi
    fd = np.linspace(args.lo, args.hi, 101) * dp.omega_phi
    results = [
        trace_identity(steady, dp),
        eigen_residuals(steady, dp),
        resolvent_agreement(grid, steady, dp),
        finite_difference_agreement(fd, steady, dp),
    ]
    if args.td_points > 0:
        results.append(timedomain_agreement(td, steady, dp))
    rows = [(r.name, r.points, r.metric, r.threshold, "PASS" if r.passed else "FAIL") for r in results]
    run.csv("oracle_check.csv", ["check", "points", "metric", "threshold", "status"], rows)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.metric:.3e} (threshold {r.threshold:.0e}, "
              f"{r.points} points)")
    if args.strict and not all(r.passed for r in results):
        raise HybridCavityError("oracle check failed")


def cmd_selection_rules(args, run: Run) -> None:
    table = selection_rule_table(args.coupling, args.M_s, args.w0, args.volume, cells=args.cells)
    rows = [(p, q, table[p, q].real, table[p, q].imag) for p in MODE_LABELS for q in MODE_LABELS]
    run.csv("selection_rules.csv", ["p", "q", "re_G", "im_G"], rows,
            f"coupling {args.coupling!r} M_s {args.M_s!r} w0 {args.w0!r} volume {args.volume!r}")
    width = 22
    print(" " * 5 + "".join(f"{q:>{width}s}" for q in MODE_LABELS))
    for p in MODE_LABELS:
        print(f"{p:5s}" + "".join(f"{_complex_text(table[p, q]):>{width}s}" for q in MODE_LABELS))


def _complex_text(z: complex) -> str:
    re_, im = (0.0 if abs(v) < 1e-14 else v for v in (z.real, z.imag))
    return f"{re_:+.4g}{im:+.4g}j"


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridcavity", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults when omitted)")
    common.add_argument("--convention", choices=[c.value for c in IntensityConvention],
                        help="override the intensity convention")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--prefix", default="", help="prefix for output file names")
    common.add_argument("--plot", action="store_true", help="also write gnuplot scripts")
    common.add_argument("--workers", type=int, default=1, help="worker processes for grid sweeps")

    axis_help = "name:start:stop:count[:unit], e.g. P_c:0.5mW:2mW:151"
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="probe response over delta")
    p.add_argument("--lo", type=float, default=0.5, help="lowest delta / omega_phi")
    p.add_argument("--hi", type=float, default=1.5, help="highest delta / omega_phi")
    p.add_argument("--points", type=int, default=2001)
    p.add_argument("--branch", type=int, default=None, help="steady-state branch (default: upper)")
    p.add_argument("--with-magnon", type=_bool, default=True, metavar="BOOL",
                   help="false sets g_m = 0 for the comparison curve")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("delay-map", parents=[common], help="tau_g over (parameter, delta)")
    p.add_argument("--axis", required=True, help=axis_help)
    p.add_argument("--unit", default=None, help="unit for the axis values when the axis names none")
    p.add_argument("--delta", default="0.9:1.3:801", help="delta / omega_phi range start:stop:count")
    p.set_defaults(func=cmd_delay_map)

    p = sub.add_parser("phase-diagram", parents=[common], help="extremal delays over (g_m, omega_m)")
    p.add_argument("--g-m", default="0.5:6:23", help="start:stop:count")
    p.add_argument("--g-m-unit", default="ratio_g_phi")
    p.add_argument("--omega-m", default="1.05:1.5:19", help="start:stop:count")
    p.add_argument("--omega-m-unit", default="ratio_omega_phi")
    p.add_argument("--half-width", type=float, default=None, help="regime window half-width / omega_phi")
    p.set_defaults(func=cmd_phase_diagram)

    p = sub.add_parser("conversions", parents=[common], help="slow/fast conversion points along an axis")
    p.add_argument("--axis", required=True, help=axis_help)
    p.add_argument("--unit", default=None)
    p.add_argument("--regime", choices=[*REGIMES, "both"], default="both")
    p.add_argument("--tol", type=float, default=None, help="bisection tolerance in axis units")
    p.add_argument("--half-width", type=float, default=None, help="regime window half-width / omega_phi")
    p.set_defaults(func=cmd_conversions)

    p = sub.add_parser("stability-scan", parents=[common], help="drift-matrix stability along an axis")
    p.add_argument("--axis", required=True, help=axis_help)
    p.add_argument("--unit", default=None)
    p.add_argument("--margin", type=float, default=0.0, help="required decay rate (rad/s)")
    p.set_defaults(func=cmd_stability_scan)

    p = sub.add_parser("oracle-check", parents=[common], help="compare independent response routes")
    p.add_argument("--lo", type=float, default=0.5)
    p.add_argument("--hi", type=float, default=1.5)
    p.add_argument("--points", type=int, default=1001, help="resolvent comparison points")
    p.add_argument("--td-points", type=int, default=20, help="time-domain points (0 skips)")
    p.add_argument("--strict", action="store_true", help="exit non-zero if any check fails")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("selection-rules", parents=[common], help="photon-magnon overlap table")
    p.add_argument("--coupling", type=float, default=1.0)
    p.add_argument("--M-s", dest="M_s", type=float, default=1.0)
    p.add_argument("--w0", type=float, default=1.0)
    p.add_argument("--volume", type=float, default=1.0)
    p.add_argument("--cells", type=int, default=32)
    p.set_defaults(func=cmd_selection_rules)
    return parser


def _error(command: str | None, exc: BaseException) -> None:
    doc = {"error": type(exc).__name__, "message": str(exc), "subcommand": command}
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    func: Callable = args.func
    try:
        run = Run(args, _config(args))
        func(args, run)
    except KeyboardInterrupt as exc:
        _error(args.command, exc)
        return EXIT_INTERRUPTED
    except (HybridCavityError, ValueError, OSError, ArithmeticError) as exc:
        _error(args.command, exc)
        return EXIT_MODULE_ERROR
    if not run.outputs:
        _error(args.command, RuntimeError("no outputs written"))
        return EXIT_MODULE_ERROR
    run.finish()
    if run.interrupted:
        _error(args.command, KeyboardInterrupt("partial grid written"))
        return EXIT_INTERRUPTED
    return 0


if __name__ == "__main__":
    sys.exit(main())
