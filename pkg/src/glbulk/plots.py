"""Figure rendering for the report path (headless matplotlib).

Every function takes plain record data, writes one PNG next to the delimited
output, and returns the path.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_limit_fit", "plot_blk_curve", "plot_bracket", "plot_spectrum",
           "plot_l4_scan"]

_BC_COLORS = {"periodic": "tab:blue", "neumann": "tab:green",
              "dirichlet": "tab:red"}


def _save(fig, out: Path) -> Path:
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out


def plot_limit_fit(estimates, out: Path) -> Path:
    """Per-area energies against 1/R with their linear fits."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for est in estimates:
        R = np.array([p[0] for p in est.points])
        y = np.array([p[1] for p in est.points])
        c = _BC_COLORS.get(est.bc_kind, "k")
        label = f"b={est.b:g} {est.bc_kind}"
        ax.plot(1.0 / R, y, "o", color=c, label=label)
        xs = np.linspace(0.0, (1.0 / R).max() * 1.05, 50)
        ax.plot(xs, est.e_blk + est.e_blk_slope * xs, "-", color=c, lw=1)
        ax.plot(0.0, est.e_blk, "*", color=c, ms=10)
    ax.set_xlabel(r"$1/R$")
    ax.set_ylabel(r"$e(b,R)/R^2$")
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    return _save(fig, out)


def plot_blk_curve(curve, out: Path, e_ab_per_area: float | None = None) -> Path:
    """Extrapolated bulk energy against b (with the small-b and b=1 anchors)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    b = np.array([p[0] for p in curve])
    E = np.array([p[1] for p in curve])
    ax.plot(b, E, "o-", color="tab:blue", label="extrapolated")
    ax.plot([0.0, 1.0], [-0.5, 0.0], "kx", ms=8, label="endpoints")
    if e_ab_per_area is not None:
        bb = np.linspace(max(0.6, b.min()), 1.0, 50)
        ax.plot(bb, e_ab_per_area * (bb - 1.0) ** 2, "--", color="tab:orange",
                label="lowest-band limit")
    ax.set_xlabel("b")
    ax.set_ylabel(r"$E_{blk}(b)$")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, out)


def plot_bracket(report: dict, out: Path) -> Path:
    """m/R per sweep point inside the fitted two-sided bracket."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    rows = report["bracket"]
    R = np.array([r["R"] for r in rows])
    m = np.array([r["m_per_length"] for r in rows])
    lo = np.array([r["lower"] for r in rows])
    hi = np.array([r["upper"] for r in rows])
    order = np.argsort(1.0 / R)
    ax.fill_between((1.0 / R)[order], lo[order], hi[order], alpha=0.25,
                    color="tab:blue", label="bracket")
    ax.plot(1.0 / R, m, "ko", label=r"$m(b,R)/R$")
    ax.axhline(report["sqrt_term"], color="tab:red", lw=1,
               label=r"$-\sqrt{-2E_{blk}}$")
    ax.set_xlabel(r"$1/R$")
    ax.set_ylabel(r"$m/R$")
    ax.set_title(f"b={report['b']:g} {report['bc_kind']}", fontsize=9)
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    return _save(fig, out)


def plot_spectrum(values, flux: int, out: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(np.arange(1, len(values) + 1), values, "o")
    for level in (1, 3, 5):
        if level < max(values) + 1:
            ax.axhline(level, color="gray", lw=0.7, ls="--")
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.set_title(f"flux N={flux}: lowest magnetic levels", fontsize=9)
    ax.grid(alpha=0.3)
    return _save(fig, out)


def plot_l4_scan(rows, out: Path) -> Path:
    """Square averages of |psi|^4 against the fitted bound, per state."""
    fig, ax = plt.subplots(figsize=(5.4, 3.6))
    kappas = sorted({r["kappa"] for r in rows})
    for k in kappas:
        sub = [r for r in rows if r["kappa"] == k]
        x = [r["h_ratio"] for r in sub]
        y = [r["avg_psi4"] for r in sub]
        ax.plot(x, y, ".", ms=2, alpha=0.4, label=f"kappa={k:g}")
        rhs = {}
        for r in sub:
            if "rhs" in r:
                rhs[r["h_ratio"]] = r["rhs"]
        if rhs:
            xs = sorted(rhs)
            ax.plot(xs, [rhs[x] for x in xs], "k^-", lw=1, ms=4)
    ax.set_xlabel(r"$H/\kappa$")
    ax.set_ylabel(r"avg $|\psi|^4$ per inner square")
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    return _save(fig, out)
