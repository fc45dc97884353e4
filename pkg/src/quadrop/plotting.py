"""Figure rendering for report tables (Agg backend, opt-in)."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def render_tables(report, out_dir):
    """One PNG per table whose first column is an abscissa; returns the paths."""
    out = Path(out_dir)
    paths = []
    for name, (header, rows) in sorted(report.tables.items()):
        if not rows or name == "control" or len(header) < 2:
            continue
        arr = np.asarray(rows, dtype=float)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for j, col in enumerate(header[1:], start=1):
            ax.plot(arr[:, 0], arr[:, j], marker="o", ms=3, label=col)
        pos = arr[:, 1:] > 0
        if np.all(arr[:, 0] > 0) and pos.all():
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel(header[0])
        ax.set_title(name)
        if len(header) <= 6:
            ax.legend(fontsize=7)
        fig.tight_layout()
        path = out / f"{name}.png"
        fig.savefig(path, dpi=100, metadata={"Software": None})
        plt.close(fig)
        paths.append(path)
    return paths
