"""Optional PNG figures rendered from the CSV tables of a run directory.

The CSV tables remain the contract; the figures only visualize them.
Needs matplotlib (``pip install 'artifact[figures]'``).
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["render_figures"]


def _table(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
    return header, data


def _columns(header: list[str], prefix: str) -> list[int]:
    return [i for i, h in enumerate(header) if h.startswith(prefix)]


def render_figures(outdir: str) -> list[str]:
    """Write ``family_norms.png``, ``solution.png`` and ``ap.png`` where the tables exist."""
    written = []
    path = os.path.join(outdir, "family.csv")
    if os.path.exists(path):
        header, data = _table(path)
        fig, ax = plt.subplots(figsize=(6, 4))
        norms = data[:, header.index("norm")]
        positive = norms > 0
        ax.semilogy(data[positive, 0], norms[positive], lw=1.2)
        ax.set_xlabel("v")
        ax.set_ylabel("||S(v)||")
        ax.set_title("family norms")
        ax.grid(True, which="both", alpha=0.3)
        written.append(_save(fig, outdir, "family_norms.png"))
    path = os.path.join(outdir, "solution.csv")
    if os.path.exists(path):
        header, data = _table(path)
        fig, (ax, bx) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
        for i in _columns(header, "u_"):
            ax.plot(data[:, 0], data[:, i], lw=1.0, label=header[i])
        ax.set_ylabel("u(v)")
        ax.legend(loc="best", fontsize="small")
        res = data[:, header.index("residual")]
        ok = np.isfinite(res) & (res > 0)
        if np.any(ok):
            bx.semilogy(data[ok, 0], res[ok], ".", ms=2)
        bx.set_xlabel("v")
        bx.set_ylabel("residual")
        bx.grid(True, which="both", alpha=0.3)
        written.append(_save(fig, outdir, "solution.png"))
    path = os.path.join(outdir, "ap.csv")
    if os.path.exists(path):
        header, data = _table(path)
        fig, (ax, bx) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
        for i in _columns(header, "H_"):
            ax.plot(data[:, 0], data[:, i], lw=1.0, label=header[i])
        for i in _columns(header, "u_"):
            ax.plot(data[:, 0], data[:, i], "--", lw=0.8, label=header[i])
        ax.legend(loc="best", fontsize="small")
        for i in _columns(header, "Q_"):
            q = np.abs(data[:, i])
            ok = q > 0
            bx.semilogy(data[ok, 0], q[ok], lw=1.0, label=f"|{header[i]}|")
        bx.set_xlabel("v")
        bx.legend(loc="best", fontsize="small")
        bx.grid(True, which="both", alpha=0.3)
        written.append(_save(fig, outdir, "ap.png"))
    return written


def _save(fig, outdir: str, name: str) -> str:
    path = os.path.join(outdir, name)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
