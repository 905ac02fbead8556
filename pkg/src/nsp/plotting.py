"""Figure rendering for the report path: SVG time series from diagnostics."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_timeseries(taus, series: dict[str, list], out_path) -> Path:
    """One figure with the requested fields over time, written as SVG."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, values in series.items():
        ax.plot(taus, values, lw=1.4, label=name)
    ax.set_xlabel(r"$\tau$")
    ax.grid(True, which="major", linestyle="--", alpha=0.5)
    if len(series) > 1:
        ax.legend(fontsize="small")
    else:
        ax.set_ylabel(next(iter(series)))
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path


def gnuplot_script(csv_name: str, fields: list[str], out_path) -> Path:
    """Companion gnuplot script plotting the same columns from the CSV."""
    lines = ["set datafile separator ','", "set key autotitle columnhead",
             "set grid", "set xlabel 'tau'", "set terminal svg",
             f"set output '{Path(csv_name).stem}.svg'"]
    plots = ", ".join(f"'{csv_name}' using 1:{i + 2} with lines"
                      for i in range(len(fields)))
    lines.append(f"plot {plots}")
    out_path = Path(out_path)
    out_path.write_text("\n".join(lines) + "\n")
    return out_path
