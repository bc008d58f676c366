"""Static SVG plots of wing samples (g against t on log-log axes)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

# fixed ids and no timestamp keep the SVG bytes reproducible
_RC = {"svg.hashsalt": "stratcheck", "svg.fonttype": "path", "font.family": "DejaVu Sans"}


def ratio_plot(report, path: Path) -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        drawn = False
        for w in report.wings:
            pts = [(t, g) for t, g in zip(w.t, w.g) if g > 0]
            if not pts:
                continue
            ts, gs = zip(*pts)
            style = "-" if w.witness else "--"
            ax.loglog(ts, gs, style, marker=".", linewidth=1.6 if w.witness else 0.8, label=w.label)
            drawn = True
        ax.set_xlabel("t")
        ax.set_ylabel("g(t)")
        base = ", ".join(f"{v:.3g}" for v in report.base)
        ax.set_title(f"{report.condition} on {report.pair[0]} < {report.pair[1]} at ({base}): {report.verdict}", fontsize=9)
        if drawn:
            ax.legend(fontsize=6, loc="best")
        else:
            ax.text(0.5, 0.5, "g = 0 on every wing", transform=ax.transAxes, ha="center")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
