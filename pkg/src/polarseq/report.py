"""Figure rendering for simulation results."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_error_rates(rows: list[dict], path: str, title: str = "") -> str:
    """Semi-log FER/BER versus Eb/N0, written to `path`."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    snr = [r["snr_db"] for r in rows]
    ax.semilogy(snr, [max(r["fer"], 1e-12) for r in rows], marker="o", label="FER")
    ax.semilogy(snr, [max(r["ber"], 1e-12) for r in rows], marker="s", label="BER")
    ax.set_xlabel("$E_b/N_0$ (dB)")
    ax.set_ylabel("error rate")
    ax.grid(True, which="both", alpha=0.4)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return path


def render_complexity(rows: list[dict], path: str, title: str = "") -> str:
    """Average counted operations and iterations versus Eb/N0."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    snr = [r["snr_db"] for r in rows]
    ops = [r["avg_add"] + r["avg_cmp"] for r in rows]
    ax.plot(snr, ops, marker="o", label="adds + comparisons")
    ax.set_xlabel("$E_b/N_0$ (dB)")
    ax.set_ylabel("average operations per frame")
    ax.grid(True, alpha=0.4)
    ax2 = ax.twinx()
    ax2.plot(snr, [r["avg_iter"] for r in rows], marker="s", color="tab:red",
             label="iterations")
    ax2.set_ylabel("average iterations", color="tab:red")
    ax.legend(loc="upper right")
    if title:
        ax.set_title(title)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return path
