"""Figure rendering for sweep CSVs.

Reads the mean rows of a sweep file and writes one PNG per metric with
a line per protocol.  The x axis is chosen from whichever variable the
sweep actually varied (send rate, else mean node speed).
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_METRICS = (
    ("avg_delay_s", "average end-to-end delay (s)", "delay"),
    ("throughput_bps", "throughput (bits/s)", "throughput"),
    ("pdr", "packet delivery ratio", "pdr"),
    ("control_overhead", "routing transmissions per delivered packet", "overhead"),
)

_STYLES = {"cpacl": dict(marker="s", color="tab:orange"),
           "tspba": dict(marker="o", color="tab:blue"),
           "aodv": dict(marker="^", color="tab:green")}


def _mean_rows(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.DictReader(fh) if row["run"] == "mean"]
    if not rows:
        raise ValueError(f"no mean rows found in {path}")
    return rows


def _x_axis(rows: list[dict]):
    rates = {row["send_rate"] for row in rows}
    if len(rates) > 1:
        return (lambda r: float(r["send_rate"])), "send rate (packets/s)"
    return (lambda r: 0.5 * (float(r["v_min"]) + float(r["v_max"]))), \
        "mean node speed (m/s)"


def plot_sweep(csv_path: str, out_dir: str = ".") -> list[str]:
    """Render the four metric figures; returns the written file paths."""
    rows = _mean_rows(csv_path)
    x_of, x_label = _x_axis(rows)
    stem = os.path.splitext(os.path.basename(csv_path))[0]
    os.makedirs(out_dir, exist_ok=True)

    groups: dict[str, list[dict]] = {}
    for row in rows:
        groups.setdefault(row["protocol"], []).append(row)

    written = []
    for column, label, suffix in _METRICS:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for protocol in sorted(groups):
            pts = [(x_of(r), float(r[column])) for r in groups[protocol]
                   if r[column] != ""]
            if not pts:
                continue
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    label=protocol, **_STYLES.get(protocol, {}))
        ax.set_xlabel(x_label)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, f"{stem}_{suffix}.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
