"""Figure rendering for report outputs.

Each function takes already-computed rows and writes one PNG next to
the delimited data file, returning the path written.  Rendering is
headless (Agg); nothing here ever opens a window.
"""

from __future__ import annotations

import math
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "render_bound_curves",
    "render_margin_scatter",
    "render_keps_sweep",
    "render_recovery_matrix",
]


def _finite(xs, ys):
    pairs = [(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]
    if not pairs:
        return [], []
    return [p[0] for p in pairs], [p[1] for p in pairs]


def render_bound_curves(rows: Sequence[dict], path: str) -> str:
    """Optimized bound versus d, with whatever corollary curves the rows carry."""
    ds = [r["d"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    x, y = _finite(ds, [r["bound"] for r in rows])
    ax.loglog(x, y, "o-", lw=1.4, ms=3.5, label="optimized")
    extra_keys = sorted({k for r in rows for k in r.get("corollary_values", {})})
    for key in extra_keys:
        ys = [r.get("corollary_values", {}).get(key, math.nan) for r in rows]
        x2, y2 = _finite(ds, ys)
        if x2:
            ax.loglog(x2, y2, "--", lw=1.0, label=key)
    ax.set_xlabel("endpoint distance d")
    ax.set_ylabel("midpoint deviation bound")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def render_margin_scatter(rows: Sequence[dict], path: str) -> str:
    """Per-pair deviations against their bounds over the pair distance."""
    ds = [r["d"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(ds, [r["deviation"] for r in rows], ".", ms=3, alpha=0.6, label="deviation")
    x, y = _finite(ds, [r["bound"] for r in rows])
    ax.plot(x, y, ".", ms=3, alpha=0.6, label="bound")
    ax.set_xlabel("pair distance d")
    ax.set_ylabel("value")
    ax.set_yscale("log")
    bad = [r for r in rows if r["margin"] < 0]
    if bad:
        ax.plot(
            [r["d"] for r in bad],
            [r["deviation"] for r in bad],
            "rx",
            ms=6,
            label="violations",
        )
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def render_keps_sweep(rows: Sequence[dict], path: str) -> str:
    """Best found deviation ratios against the closed-form reference curves."""
    eps = [r["eps"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(eps, [r["vestfrid_ratio"] for r in rows], "o-", ms=4, label="kink ratio")
    ax.plot(eps, [r["best_found"] for r in rows], "s-", ms=4, label="best found")
    ax.plot(eps, [r["cor33_bound"] for r in rows], "--", label="small-eps cap")
    ax.axhline(0.5, color="gray", lw=0.8, ls=":", label="limit 1/2")
    ax.axhline(math.e, color="gray", lw=0.8, ls="-.", label="limit cap e")
    ax.set_xscale("log")
    ax.set_xlabel("eps")
    ax.set_ylabel("deviation ratio")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def render_recovery_matrix(sigma: Sequence[int], signs: Sequence[int], path: str) -> str:
    """Signed permutation heatmap of the recovered isometry."""
    n = len(sigma)
    mat = [[0.0] * n for _ in range(n)]
    for i, (s, lam) in enumerate(zip(sigma, signs)):
        mat[s][i] = float(lam)
    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    im = ax.imshow(mat, cmap="coolwarm", vmin=-1, vmax=1)
    ax.set_xlabel("input coordinate")
    ax.set_ylabel("output slot")
    fig.colorbar(im, ax=ax, label="sign")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)
