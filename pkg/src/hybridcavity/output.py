"""CSV, manifest and gnuplot emission for the command-line tools."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence


def fmt(x) -> str:
    """Shortest round-trip text for a number; strings pass through."""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("non-finite value reached a CSV cell; mask it first")
    return repr(x)


def cell(value: float, reason: str) -> str:
    """A tau cell: the number, or the mask code when ``reason`` is set."""
    return reason if reason else fmt(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> Path:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


@dataclass
class RunManifest:
    version: str
    config_hash: str
    subcommand: str
    arguments: dict[str, Any]
    wall_time_s: float = 0.0
    outputs: list[str] = field(default_factory=list)
    interrupted: bool = False

    def write(self, path: Path) -> Path:
        doc = {
            "tool": "hybridcavity",
            "version": self.version,
            "config_hash": self.config_hash,
            "subcommand": self.subcommand,
            "arguments": self.arguments,
            "wall_time_s": self.wall_time_s,
            "outputs": self.outputs,
            "interrupted": self.interrupted,
        }
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def spectrum_gnuplot(csv_name: str, overlay: str | None = None) -> str:
    """Four-panel script: absorption, dispersion, phase, group delay (ms).

    Expects the spectrum CSV column order (delta, Re, Im, phase, tau_g).
    """
    panels = [
        ("Re[eps_out]", "2"),
        ("Im[eps_out]", "3"),
        ("phase of t_p (rad)", "4"),
        ("tau_g (ms)", "($5*1e3)"),
    ]
    out = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        "set terminal pngcairo size 1200,900",
        f"set output '{Path(csv_name).stem}.png'",
        "set multiplot layout 2,2",
        "set xlabel 'delta / omega_phi'",
    ]
    for label, col in panels:
        plot = f"plot '{csv_name}' using 1:{col} with lines title 'with magnon'"
        if overlay:
            plot += f", '{overlay}' using 1:{col} with lines dashtype 2 title 'g_m = 0'"
        out += [f"set ylabel '{label}'", plot]
    out.append("unset multiplot")
    return "\n".join(out) + "\n"


def heatmap_gnuplot(csv_name: str, xcol: int, ycol: int, zcol: int, xlabel: str, ylabel: str,
                    title: str, png: str) -> str:
    """Heat map of a tau column converted to ms; mask codes plot as gaps."""
    return "\n".join([
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set datafile missing NaN",
        "set terminal pngcairo size 900,700",
        f"set output '{png}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set cblabel 'tau_g (ms)'",
        f"set title '{title}'",
        "set view map",
        f"plot '{csv_name}' using {xcol}:{ycol}:(valid({zcol}) ? column({zcol})*1e3 : NaN) "
        "with points pointtype 5 pointsize 0.6 palette notitle",
    ]) + "\n"
