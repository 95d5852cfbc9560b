"""Render harness output files into figures.

Four figure kinds, one per input contract:

* ``mistakes``        10-column round log CSV -> cumulative expected
                      mistakes, realized mistakes, and comparator loss.
* ``regret_vs_bound`` key=value summary file(s) -> paired bars of the
                      theorem bound and the actual regret.
* ``figure1``         4-column gap-curve grid CSV -> the green/red/blue
                      margin curves.
* ``abstention``      6-column abstention log CSV -> cumulative expected
                      loss, best expert so far, and the running bound.

Series data is extracted purely from the input bytes; figures use a fixed
size and carry no timestamps, so runs are reproducible.  Schema violations
raise :class:`SchemaError` naming what is missing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

PLOT_KINDS = ("mistakes", "regret_vs_bound", "figure1", "abstention")

ROUND_COLUMNS = (
    "t", "a_t", "mix", "expected_mistake", "realized_mistake", "learner_loss",
    "comparator_loss", "grad_norm_sq", "surrogate_gap", "conditional_gap",
)
FIGURE1_COLUMNS = ("z", "green", "red", "blue")
ABSTENTION_COLUMNS = (
    "t", "b_t", "expected_loss", "cum_expected_loss",
    "best_expert_loss_so_far", "bound",
)
SUMMARY_KEYS = ("bound", "regret_actual")

FIGSIZE = (8.0, 5.0)
DPI = 100


class SchemaError(ValueError):
    """Input does not match the documented column/key contract."""


@dataclass(frozen=True)
class PlotJob:
    kind: str
    inputs: tuple[str, ...]
    output: str
    title: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in PLOT_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; expected one of {PLOT_KINDS}"
            )
        if not self.inputs:
            raise ValueError("need at least one input file")


@dataclass(frozen=True)
class FigureSummary:
    """Structural description used by tests instead of golden images."""

    kind: str
    series: dict[str, list[float]]
    series_count: int
    axes_count: int


def _read_csv(path: str, expected: tuple[str, ...]) -> list[dict[str, str]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path}: empty file, missing header") from None
            missing = [c for c in expected if c not in header]
            if missing:
                raise SchemaError(
                    f"{path}: missing column(s): {', '.join(missing)}"
                )
            rows = [dict(zip(header, row)) for row in reader if row]
    except OSError as exc:
        raise OSError(f"cannot read {path!r}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _column(rows: list[dict[str, str]], name: str) -> list[float]:
    return [float(r[name]) for r in rows]


def _cumulative(values: list[float]) -> list[float]:
    out = []
    total = 0.0
    for v in values:
        total += v
        out.append(total)
    return out


def _read_summary(path: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line or "=" not in line:
                    continue
                key, value = line.split("=", 1)
                entries[key] = value
    except OSError as exc:
        raise OSError(f"cannot read {path!r}: {exc}") from exc
    missing = [k for k in SUMMARY_KEYS if k not in entries]
    if missing:
        raise SchemaError(f"{path}: missing key(s): {', '.join(missing)}")
    return entries


def extract_series(job: PlotJob) -> dict[str, list[float]]:
    """Pure extraction step: input files to named numeric series."""
    if job.kind == "mistakes":
        rows = _read_csv(job.inputs[0], ROUND_COLUMNS)
        return {
            "t": _column(rows, "t"),
            "cumulative expected mistakes": _cumulative(
                _column(rows, "expected_mistake")
            ),
            "cumulative realized mistakes": _cumulative(
                _column(rows, "realized_mistake")
            ),
            "cumulative comparator loss": _cumulative(
                _column(rows, "comparator_loss")
            ),
        }
    if job.kind == "figure1":
        rows = _read_csv(job.inputs[0], FIGURE1_COLUMNS)
        return {
            "z": _column(rows, "z"),
            "green": _column(rows, "green"),
            "red": _column(rows, "red"),
            "blue": _column(rows, "blue"),
        }
    if job.kind == "abstention":
        rows = _read_csv(job.inputs[0], ABSTENTION_COLUMNS)
        return {
            "t": _column(rows, "t"),
            "cumulative expected loss": _column(rows, "cum_expected_loss"),
            "best expert so far": _column(rows, "best_expert_loss_so_far"),
            "bound": _column(rows, "bound"),
        }
    # regret_vs_bound: one bound/regret pair per summary file
    bounds, regrets = [], []
    for path in job.inputs:
        summary = _read_summary(path)
        bounds.append(float(summary["bound"]))
        regrets.append(float(summary["regret_actual"]))
    return {"bound": bounds, "actual regret": regrets}


def build_figure(job: PlotJob):
    """Return (figure, FigureSummary); the caller owns closing the figure."""
    series = extract_series(job)
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    if job.kind == "regret_vs_bound":
        n = len(series["bound"])
        positions = range(n)
        width = 0.4
        ax.bar([p - width / 2 for p in positions], series["bound"], width,
               label="bound")
        ax.bar([p + width / 2 for p in positions], series["actual regret"], width,
               label="actual regret")
        ax.set_xticks(list(positions))
        ax.set_xticklabels([f"run {i + 1}" for i in positions])
        ax.set_ylabel("mistakes minus comparator loss")
        series_count = len(ax.patches)
    elif job.kind == "figure1":
        for name in ("green", "red", "blue"):
            ax.plot(series["z"], series[name], color=name, label=name)
        ax.set_xlabel("margin z")
        ax.set_ylabel("loss / gap curve")
        series_count = len(ax.lines)
    else:
        x_name = "t"
        for name, values in series.items():
            if name == x_name:
                continue
            ax.plot(series[x_name], values, label=name)
        ax.set_xlabel("round")
        ax.set_ylabel("cumulative value")
        series_count = len(ax.lines)
    ax.legend(loc="best")
    if job.title:
        ax.set_title(job.title)
    summary = FigureSummary(
        kind=job.kind,
        series=series,
        series_count=series_count,
        axes_count=len(fig.axes),
    )
    return fig, summary


def render(job: PlotJob) -> FigureSummary:
    """Write the figure for ``job`` to its output path."""
    fig, summary = build_figure(job)
    try:
        fig.savefig(job.output)
    except OSError as exc:
        raise OSError(f"cannot write figure {job.output!r}: {exc}") from exc
    finally:
        plt.close(fig)
    return summary
