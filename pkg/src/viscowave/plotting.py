"""Static SVG figures for traces: log-scale energy histories rendered with
matplotlib.  Presentation only; nothing here feeds back into computation.

Figures are deterministic: the SVG hash salt is tied to the config hash and
the date stamp is suppressed, so repeated runs of the same scenario render
identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__

ENERGY_SERIES = ("e", "E_script", "E_mod", "L")


def save_energy_svg(path, t, series: dict, meta: dict) -> Path:
    """Render the energy columns on a log-y axis and write an SVG whose
    metadata records the run provenance."""
    t = np.asarray(t, dtype=float)
    salt = str(meta.get("config_hash", "viscowave"))
    with plt.rc_context({"svg.hashsalt": salt}):
        fig, ax = plt.subplots(figsize=(7.2, 4.2), constrained_layout=True)
        for name in ENERGY_SERIES:
            if name not in series:
                continue
            y = np.asarray(series[name], dtype=float)
            positive = y > 0.0
            if positive.any():
                ax.plot(t[positive], y[positive], lw=1.2, label=name)
        ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel("energy")
        ax.grid(alpha=0.3, which="both")
        ax.legend(loc="best", fontsize=9)
        description = "; ".join(f"{k}={v}" for k, v in sorted(meta.items()))
        path = Path(path)
        fig.savefig(
            path,
            format="svg",
            metadata={
                "Date": None,
                "Creator": f"viscowave {__version__}",
                "Description": description,
            },
        )
        plt.close(fig)
    return path
