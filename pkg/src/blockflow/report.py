"""Figure rendering for cost-model sweeps.

Everything here draws to files through the Agg backend so the CLI can be
used on headless machines.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .costmodel import SweepRow


def render_sweep_figure(rows: list[SweepRow], path, title: str = "") -> None:
    """Plot bytes moved (top) and seeks (bottom) against memory budget."""
    mem = [r.memory_bytes for r in rows]
    fig, (ax_bytes, ax_seeks) = plt.subplots(
        2, 1, figsize=(7.5, 7.0), sharex=True,
        gridspec_kw={"height_ratios": [3, 2]})

    ax_bytes.loglog(mem, [r.dbp_bytes for r in rows], "o-", ms=3,
                    label="dense-only")
    ax_bytes.loglog(mem, [r.spp_bytes for r in rows], "s-", ms=3,
                    label="streaming-only")
    ax_bytes.loglog(mem, [r.bbp_bytes for r in rows], "k--", lw=2,
                    label="per-block selection")
    ax_bytes.set_ylabel("bytes moved per pass")
    ax_bytes.grid(True, which="both", alpha=0.3)
    ax_bytes.legend(loc="best")
    if title:
        ax_bytes.set_title(title)

    ax_seeks.loglog(mem, [max(r.dbp_seeks, 1.0) for r in rows], "o-", ms=3,
                    label="dense-only")
    ax_seeks.loglog(mem, [max(r.spp_seeks, 1.0) for r in rows], "s-", ms=3,
                    label="streaming-only")
    ax_seeks.set_ylabel("seeks per pass")
    ax_seeks.set_xlabel("memory budget (bytes)")
    ax_seeks.grid(True, which="both", alpha=0.3)
    ax_seeks.legend(loc="best")

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
