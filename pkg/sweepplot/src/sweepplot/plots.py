"""Figure construction from the versioned harness CSV files.

Everything here is a pure function of the file contents: values are parsed,
selected, and handed to matplotlib untouched, so the plotted ordinates equal
the CSV values exactly.  No design or bound quantity is recomputed.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError, SchemaError

SCHEMA_VERSION = 1

# column order of the harness outputs, frozen per schema version
SWEEP_COLUMNS = ("T", "Ddes_norm", "gamma_e_sq", "T_gamma_e_sq", "iters", "status")
VALIDATION_COLUMNS = ("replica", "goal_ok", "contain_ok", "noise_ok",
                      "radius_sq", "logdet", "excitation_margin")

_SERIES_LABELS = {
    "gamma_e_sq": r"$\gamma_e^2$",
    "T_gamma_e_sq": r"$T\,\gamma_e^2$",
    "Ddes_norm": r"$\|D_{\mathrm{des}}\|$",
    "iters": "outer iterations",
}


@dataclass(frozen=True)
class PlotSpec:
    """Input file, output file, axis scaling, and the series per panel."""

    csv_path: str
    out_path: str
    loglog: bool = True
    series: tuple = ("T_gamma_e_sq", "gamma_e_sq")

    def __post_init__(self):
        if not self.series:
            raise DataError("series selection is empty")
        unknown = [s for s in self.series if s not in _SERIES_LABELS]
        if unknown:
            raise DataError(f"unknown series {unknown}; choose from "
                            f"{sorted(_SERIES_LABELS)}")


@dataclass(frozen=True)
class SweepTable:
    """Plottable sweep rows as parallel arrays, plus what was left out."""

    T: np.ndarray
    Ddes_norm: np.ndarray
    gamma_e_sq: np.ndarray
    T_gamma_e_sq: np.ndarray
    iters: np.ndarray
    skipped: tuple

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)


@dataclass(frozen=True)
class ValidationTable:
    """Per-replica validation rows as parallel arrays."""

    goal_ok: np.ndarray
    contain_ok: np.ndarray
    noise_ok: np.ndarray
    radius_sq: np.ndarray
    logdet: np.ndarray
    excitation_margin: np.ndarray


def _read_versioned_csv(path: str, expected: tuple) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    lines = [ln for ln in lines if ln.strip()]
    if not lines or not lines[0].startswith("# schema_version="):
        raise SchemaError(f"{path}: first line must be '# schema_version=...'")
    version = lines[0].split("=", 1)[1].strip()
    if version != str(SCHEMA_VERSION):
        raise SchemaError(f"{path}: schema_version {version} is not supported "
                          f"(this reader understands {SCHEMA_VERSION})")
    if len(lines) < 2:
        raise SchemaError(f"{path}: header line is missing")
    found = tuple(lines[1].split(","))
    if found != expected:
        missing = [c for c in expected if c not in found]
        unexpected = [c for c in found if c not in expected]
        raise SchemaError(
            f"{path}: columns do not match schema version {SCHEMA_VERSION}: "
            f"missing {missing}, unexpected {unexpected}, "
            f"got {list(found)}, expected {list(expected)}"
        )
    return lines[2:]


def _cells(path: str, line: str, n: int) -> list:
    cells = line.split(",")
    if len(cells) != n:
        raise DataError(f"{path}: expected {n} cells per row, got "
                        f"{len(cells)} in {line!r}")
    return cells


def parse_sweep(path: str) -> SweepTable:
    """Read sweep.csv, keeping rows with status ok and both energy cells set."""
    rows = _read_versioned_csv(path, SWEEP_COLUMNS)
    if not rows:
        raise DataError(f"{path}: no data rows")
    kept = {name: [] for name in SWEEP_COLUMNS[:5]}
    skipped = []
    for line in rows:
        cells = _cells(path, line, len(SWEEP_COLUMNS))
        status = cells[5]
        if status != "ok" or "" in cells[2:4]:
            skipped.append(status or "blank")
            continue
        kept["T"].append(int(cells[0]))
        kept["Ddes_norm"].append(float(cells[1]))
        kept["gamma_e_sq"].append(float(cells[2]))
        kept["T_gamma_e_sq"].append(float(cells[3]))
        kept["iters"].append(int(cells[4]))
    if not kept["T"]:
        raise DataError(f"{path}: no plottable rows; statuses were "
                        f"{sorted(set(skipped))}")
    return SweepTable(
        T=np.array(kept["T"], dtype=float),
        Ddes_norm=np.array(kept["Ddes_norm"]),
        gamma_e_sq=np.array(kept["gamma_e_sq"]),
        T_gamma_e_sq=np.array(kept["T_gamma_e_sq"]),
        iters=np.array(kept["iters"]),
        skipped=tuple(skipped),
    )


def parse_validation(path: str) -> ValidationTable:
    """Read validation.csv; every row carries one Monte Carlo replica."""
    rows = _read_versioned_csv(path, VALIDATION_COLUMNS)
    if not rows:
        raise DataError(f"{path}: no data rows")
    cols = {name: [] for name in VALIDATION_COLUMNS[1:]}
    for line in rows:
        cells = _cells(path, line, len(VALIDATION_COLUMNS))
        for name, cell in zip(VALIDATION_COLUMNS[1:], cells[1:]):
            cols[name].append(float(cell))
    return ValidationTable(
        goal_ok=np.array(cols["goal_ok"]),
        contain_ok=np.array(cols["contain_ok"]),
        noise_ok=np.array(cols["noise_ok"]),
        radius_sq=np.array(cols["radius_sq"]),
        logdet=np.array(cols["logdet"]),
        excitation_margin=np.array(cols["excitation_margin"]),
    )


def _omitted_label(skipped: tuple) -> str:
    counts = Counter(skipped)
    parts = ", ".join(f"{n} {status}" for status, n in sorted(counts.items()))
    return f"omitted: {parts}"


def build_sweep_figure(table: SweepTable, spec: PlotSpec) -> plt.Figure:
    """One panel per selected series, ordinates exactly the table columns."""
    n = len(spec.series)
    fig, axes = plt.subplots(1, n, figsize=(4.2 * n, 3.4))
    for k, (ax, name) in enumerate(zip(np.atleast_1d(axes), spec.series)):
        ax.plot(table.T, table.column(name), "o-", color="C0")
        if spec.loglog:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel("T")
        ax.set_ylabel(_SERIES_LABELS[name])
        ax.set_title(f"({chr(ord('a') + k)})")
        ax.grid(True, which="both", alpha=0.3)
        if k == 0 and table.skipped:
            ax.plot([], [], " ", label=_omitted_label(table.skipped))
            ax.legend(loc="best", frameon=False, handlelength=0)
    fig.tight_layout()
    return fig


def build_validation_figure(table: ValidationTable) -> plt.Figure:
    """Coverage histograms: excitation margins and squared radii."""
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(8.4, 3.4))
    ax0.hist(table.excitation_margin, bins=30, color="C0", alpha=0.8)
    ax0.axvline(0.0, color="C3", linewidth=1.0)
    ax0.set_xlabel("excitation margin")
    ax0.set_ylabel("replicas")
    ax0.set_title("(a)")
    ax1.hist(table.radius_sq, bins=30, color="C0", alpha=0.8)
    ax1.set_xlabel(r"squared radius $R$")
    ax1.set_title("(b)")
    fig.suptitle(
        f"goal {table.goal_ok.mean():.1%}, "
        f"containment {table.contain_ok.mean():.1%}, "
        f"noise bound {table.noise_ok.mean():.1%}",
        fontsize=10,
    )
    fig.tight_layout()
    return fig


def render_sweep(csv_path: str, out_path: str) -> str:
    """Parse, plot, and write; any parse failure leaves no output file."""
    spec = PlotSpec(csv_path, out_path)
    table = parse_sweep(csv_path)
    fig = build_sweep_figure(table, spec)
    try:
        fig.savefig(out_path, dpi=150)
    finally:
        plt.close(fig)
    return out_path


def render_validation(csv_path: str, out_path: str) -> str:
    table = parse_validation(csv_path)
    fig = build_validation_figure(table)
    try:
        fig.savefig(out_path, dpi=150)
    finally:
        plt.close(fig)
    return out_path
