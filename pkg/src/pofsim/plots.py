"""Static charts from the emitted CSVs.

Each chart is a pure function of its CSV contents: kinematic trace panels
(acceleration, velocity, gap over time, one line per input file), sweep
curves with error bars, and the security rate comparison on a log scale.
Empty CSVs (header only) yield charts with bare axes.
"""

from __future__ import annotations

import csv
import os
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


class SchemaError(ValueError):
    """CSV is missing a required column."""


def _read_csv(path, required: Sequence[str]) -> List[Dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"{os.path.basename(str(path))}: "
                                  f"missing column {col!r}")
        return list(reader)


def plot_traces(paths: Sequence, out_path, labels: Optional[Sequence[str]] = None,
                vehicle: str = "C") -> str:
    """Acceleration, velocity, and gap of one vehicle over time; one curve
    per input traces.csv (e.g. runs at different controller gains)."""
    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    for i, path in enumerate(paths):
        rows = [r for r in _read_csv(path, ("time", "vehicle", "position",
                                            "velocity", "acceleration",
                                            "gap"))
                if r["vehicle"] == vehicle]
        label = labels[i] if labels else os.path.basename(str(path))
        times = [float(r["time"]) for r in rows]
        axes[0].plot(times, [float(r["acceleration"]) for r in rows],
                     label=label)
        axes[1].plot(times, [float(r["velocity"]) for r in rows], label=label)
        axes[2].plot(times, [float(r["gap"]) for r in rows], label=label)
    axes[0].set_ylabel("acceleration [m/s$^2$]")
    axes[1].set_ylabel("velocity [m/s]")
    axes[2].set_ylabel("gap [m]")
    axes[2].set_xlabel("time [s]")
    for ax in axes:
        ax.grid(alpha=0.3)
        if ax.lines:
            ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return str(out_path)


def plot_sweep(path, out_path) -> str:
    """Mean verification time with one-sigma bars per swept value."""
    rows = _read_csv(path, ("parameter", "value", "mean_time", "std_time",
                            "pass_rate"))
    fig, ax = plt.subplots(figsize=(6, 4))
    if rows:
        name = rows[0]["parameter"]
        xs = [float(r["value"]) for r in rows]
        ys = [float(r["mean_time"]) for r in rows]
        es = [float(r["std_time"]) for r in rows]
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3)
        ax.set_xlabel(name)
    else:
        ax.set_xlabel("value")
    ax.set_ylabel("verification time [s]")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return str(out_path)


def plot_security(path, out_path) -> str:
    """Empirical vs analytical passing probability per challenge count."""
    rows = _read_csv(path, ("k", "empirical", "closed_form", "exact",
                            "lemma1_bound", "steady_state"))
    fig, ax = plt.subplots(figsize=(6, 4))
    if rows:
        ks = [int(r["k"]) for r in rows]
        series = (("empirical", "o-"), ("closed_form", "s--"),
                  ("exact", "d--"), ("lemma1_bound", "^:"),
                  ("steady_state", "v:"))
        for col, style in series:
            ys = [float(r[col]) for r in rows]
            ax.semilogy(ks, [max(y, 1e-12) for y in ys], style, label=col)
        ax.legend(fontsize=8)
        ax.set_xticks(ks)
    ax.set_xlabel("challenges")
    ax.set_ylabel("passing probability")
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return str(out_path)


def emit_plots(out_dir, traces: Sequence = (), sweep=None, security=None,
               trace_labels: Optional[Sequence[str]] = None) -> List[str]:
    """Produce one chart per supplied CSV input; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if traces:
        written.append(plot_traces(traces, os.path.join(out_dir, "traces.png"),
                                   trace_labels))
    if sweep is not None:
        written.append(plot_sweep(sweep, os.path.join(out_dir, "sweep.png")))
    if security is not None:
        written.append(plot_security(security,
                                     os.path.join(out_dir, "security.png")))
    return written
