"""Figure rendering from powerobs trajectory CSV logs.

Reads the flat CSV schema emitted by ``powerobs simulate`` / ``powerobs
sweep`` (columns ``t, delta_i, omega_i, E_i, Ehat_<observer>_i,
omegahat_i, err_*, ...``) and renders per-machine time-series figures:

* ``voltage_error`` — E_i - Ehat_i for every observer present in the file;
* ``speed_error``   — omega_i - omegahat_i, one curve per input CSV (use
  the per-value CSVs of a k_omega sweep to overlay gains).

Rendering is read-only and deterministic: the same CSV produces
byte-identical SVG output (fixed hash salt, no embedded timestamps).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = [
    "FigureSpec",
    "PlotsError",
    "MissingColumn",
    "MalformedRow",
    "EmptyData",
    "read_log",
    "build_figure",
    "render",
]

KINDS = ("voltage_error", "speed_error")
FORMATS = ("png", "svg")
VOLTAGE_OBSERVERS = ("drem", "ftc", "kalman")

HASH_SALT = "powerobs-plots"


class PlotsError(Exception):
    """Base class for rendering errors."""


class MissingColumn(PlotsError):
    def __init__(self, column, path):
        super().__init__(f"column {column!r} not found in {path}")
        self.column = column


class MalformedRow(PlotsError):
    def __init__(self, path, line, reason):
        super().__init__(f"{path}:{line}: {reason}")
        self.line = line


class EmptyData(PlotsError):
    def __init__(self, path):
        super().__init__(f"{path}: no data rows after the header")


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: inputs, kind, machine, output."""

    csv_paths: tuple[str, ...]
    kind: str
    machine: int
    out_path: str
    event_time: float | None = None
    fmt: str = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if isinstance(self.csv_paths, (str, Path)):
            object.__setattr__(self, "csv_paths", (str(self.csv_paths),))
        else:
            object.__setattr__(self, "csv_paths", tuple(str(p) for p in self.csv_paths))
        if not self.csv_paths:
            raise PlotsError("no input CSV given")
        if self.kind not in KINDS:
            raise PlotsError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.machine < 1:
            raise PlotsError(f"machine index is 1-based, got {self.machine}")
        fmt = self.fmt
        if fmt is None:
            fmt = Path(self.out_path).suffix.lstrip(".").lower() or "png"
        if fmt not in FORMATS:
            raise PlotsError(f"format must be one of {FORMATS}, got {fmt!r}")
        object.__setattr__(self, "fmt", fmt)


def read_log(path):
    """Parse one trajectory CSV into a {column: list[float]} mapping."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyData(path) from None
        ncol = len(header)
        data = {name: [] for name in header}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != ncol:
                raise MalformedRow(path, lineno,
                                   f"expected {ncol} fields, got {len(row)}")
            for name, val in zip(header, row):
                try:
                    data[name].append(float(val))
                except ValueError:
                    raise MalformedRow(path, lineno,
                                       f"non-numeric value {val!r} in {name}") from None
    if not data[header[0]]:
        raise EmptyData(path)
    return data


def _column(data, name, path):
    if name not in data:
        raise MissingColumn(name, path)
    return data[name]


def _series_for(spec: FigureSpec, data, path):
    """(label, error-values) pairs for one CSV."""
    i = spec.machine
    stem = Path(path).stem
    multi = len(spec.csv_paths) > 1
    t = _column(data, "t", path)
    out = []
    if spec.kind == "voltage_error":
        E = _column(data, f"E_{i}", path)
        found = False
        for obs in VOLTAGE_OBSERVERS:
            col = f"Ehat_{obs}_{i}"
            if col not in data:
                continue
            found = True
            err = [e - eh for e, eh in zip(E, data[col])]
            label = f"{obs} ({stem})" if multi else obs
            out.append((label, err))
        if not found:
            raise MissingColumn(f"Ehat_*_{i}", path)
    else:
        om = _column(data, f"omega_{i}", path)
        omh = _column(data, f"omegahat_{i}", path)
        err = [a - b for a, b in zip(om, omh)]
        out.append((stem if multi else "speed observer", err))
    return t, out


def build_figure(spec: FigureSpec):
    """Assemble the matplotlib figure for a spec (no file output)."""
    plt.rcParams["svg.hashsalt"] = HASH_SALT
    fig, ax = plt.subplots(figsize=(7.2, 4.2))
    t_span = [None, None]
    for path in spec.csv_paths:
        data = read_log(path)
        t, series = _series_for(spec, data, path)
        t_span[0] = t[0] if t_span[0] is None else min(t_span[0], t[0])
        t_span[1] = t[-1] if t_span[1] is None else max(t_span[1], t[-1])
        for label, err in series:
            ax.plot(t, err, lw=1.2, label=label)
    if spec.event_time is not None and t_span[0] <= spec.event_time <= t_span[1]:
        ax.axvline(spec.event_time, color="k", lw=0.8, ls="--",
                   label=f"event t = {spec.event_time:g} s")
    i = spec.machine
    if spec.kind == "voltage_error":
        ax.set_ylabel(f"voltage observation error  $E_{{{i}}} - \\hat{{E}}_{{{i}}}$ (p.u.)")
    else:
        ax.set_ylabel(f"speed observation error  "
                      f"$\\omega_{{{i}}} - \\hat{{\\omega}}_{{{i}}}$ (rad/s)")
    ax.set_xlabel("time (s)")
    ax.set_title(f"machine {i}")
    ax.grid(True, alpha=0.4)
    ax.legend(loc="best")
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> str:
    """Render the figure to spec.out_path; returns the output path."""
    fig = build_figure(spec)
    try:
        # a None Date keeps SVG output free of timestamps
        meta = {"Date": None} if spec.fmt == "svg" else None
        fig.savefig(spec.out_path, format=spec.fmt, dpi=150, metadata=meta)
    finally:
        plt.close(fig)
    return spec.out_path
