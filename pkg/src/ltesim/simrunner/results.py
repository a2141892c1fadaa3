"""Result tables, CSV serialization and gnuplot scripts."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from ..metrics import mean_and_stderr

HEADER = ("sweep_var", "sweep_value", "metric", "mean", "stderr", "n")


@dataclass(frozen=True)
class Row:
    sweep_var: str
    sweep_value: float
    metric: str
    mean: float
    stderr: float
    n: int


@dataclass
class ResultTable:
    experiment: str
    rows: list = field(default_factory=list)

    def add(self, sweep_var, sweep_value, metric, samples):
        mean, se, n = mean_and_stderr(samples)
        self.rows.append(Row(sweep_var, float(sweep_value), metric, mean, se, n))

    def add_exact(self, sweep_var, sweep_value, metric, value, n=1):
        self.rows.append(Row(sweep_var, float(sweep_value), metric, float(value), 0.0, int(n)))

    def sorted(self):
        return ResultTable(self.experiment,
                           sorted(self.rows, key=lambda r: (r.sweep_value, r.metric, r.sweep_var)))

    def get(self, metric, sweep_value=None):
        for r in self.rows:
            if r.metric == metric and (sweep_value is None or r.sweep_value == float(sweep_value)):
                return r
        raise KeyError((metric, sweep_value))

    def series(self, metric):
        """``(sweep_values, rows)`` for one metric, ordered by sweep value."""
        rows = sorted((r for r in self.rows if r.metric == metric), key=lambda r: r.sweep_value)
        return [r.sweep_value for r in rows], rows

    def metrics(self):
        return sorted({r.metric for r in self.rows})


def _fmt(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def to_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in table.sorted().rows:
        w.writerow([r.sweep_var, _fmt(r.sweep_value), r.metric, _fmt(r.mean), _fmt(r.stderr), r.n])
    return buf.getvalue()


def from_csv(text, experiment=""):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    rows = [Row(sv, float(v), m, float(mu), float(se), int(n)) for sv, v, m, mu, se, n in reader]
    return ResultTable(experiment, rows)


def read_results(path):
    path = Path(path)
    return from_csv(path.read_text(encoding="utf-8"), path.stem)


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


PLOT_LAYOUT = {
    "mu-gain": ("number of users k", "cell throughput [bit/s]", "sum_tput/"),
    "das": ("users per cell", "area spectral efficiency [bit/s/Hz/m^2]", "ase/"),
    "femto": ("femto APs per macro cell", "average user throughput [bit/s]", "tput_"),
    "cfo": ("SNR [dB]", "throughput loss [bit/s/Hz]", "loss_"),
    "pilot-power": ("velocity [km/h]", "throughput [bit/s/Hz]", "tput_"),
}


def plot_script(table, csv_name):
    """Gnuplot script drawing every metric family of the experiment's figure."""
    xlabel, ylabel, prefix = PLOT_LAYOUT.get(table.experiment, ("sweep value", "value", ""))
    metrics = [m for m in table.metrics() if m.startswith(prefix)] or table.metrics()
    lines = [
        "# regenerate with: gnuplot " + Path(csv_name).with_suffix(".gp").name,
        "set datafile separator ','",
        "set terminal pngcairo size 900,600",
        f"set output '{Path(csv_name).with_suffix('.png').name}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key outside right",
        "set grid",
    ]
    plots = [f"'{csv_name}' using (strcol(3) eq '{m}' ? $2 : 1/0):4:5 with yerrorlines title '{m}'"
             for m in metrics]
    if table.experiment == "femto" and "jain" in table.metrics():
        lines.append("set y2label \"Jain's fairness index\"")
        lines.append("set y2tics")
        plots.append(f"'{csv_name}' using (strcol(3) eq 'jain' ? $2 : 1/0):4 axes x1y2 "
                     "with lines dashtype 2 title 'jain'")
    lines.append("plot " + ", \\\n     ".join(plots) if plots else "# no data")
    return "\n".join(lines) + "\n"


def emit_results(table, out_dir):
    """Write ``<experiment>.csv`` and ``<experiment>.gp`` into ``out_dir``."""
    out = Path(out_dir)
    if not out.is_dir():
        raise OSError(f"output directory {out} does not exist")
    name = table.experiment or "results"
    csv_path = out / f"{name}.csv"
    gp_path = out / f"{name}.gp"
    _atomic_write(csv_path, to_csv(table))
    _atomic_write(gp_path, plot_script(table, csv_path.name))
    return csv_path, gp_path
