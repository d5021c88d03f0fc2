#!/usr/bin/env python3
"""Static figures from the CSV tables written by the sketchlidar experiment subcommands.

Usage: plot_results.py RESULTS_DIR [--out FIG_DIR]
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def plot_clt(df, errors, out):
    fig, axes = plt.subplots(1, len(df), figsize=(3.2 * len(df), 3), sharey=False)
    for ax, (_, row) in zip(np.atleast_1d(axes), df.iterrows()):
        e = errors[errors.n == row.n].error
        ax.hist(e, bins=40, density=True, alpha=0.6)
        x = np.linspace(e.min(), e.max(), 200)
        s = row.predicted_std
        ax.plot(x, np.exp(-0.5 * (x / s) ** 2) / (s * np.sqrt(2 * np.pi)), "k")
        ax.set_title(f"n = {row.n:g}")
        ax.set_xlabel("error (bins)")
    fig.tight_layout()
    fig.savefig(out / "clt.png", dpi=120)


def plot_rep(df, out):
    for sbr, part in df.groupby("SBR"):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for scheme, s in part.groupby("scheme"):
            ax.semilogy(s["2m"], s.rep.clip(lower=1e-3), marker=".", label=scheme)
        ax.axhline(1.0, color="grey", ls=":")
        ax.set_xlabel("2m")
        ax.set_ylabel("REP (%)")
        ax.set_title(f"SBR = {sbr:g}")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / f"rep_sbr{sbr:g}.png", dpi=120)


def plot_contour(df, out):
    levels = [c for c in df.columns if c.startswith("det_")]
    methods = df.method.unique()
    for n, part in df.groupby("n"):
        fig, axes = plt.subplots(1, 1 + len(levels), figsize=(4.2 * (1 + len(levels)), 3.6))
        panels = [("rmse", 10.0, "RMSE = 10 bins")] + [(c, 0.95, f"95% within {c[4:]} bins") for c in levels]
        for ax, (col, level, title) in zip(axes, panels):
            for k, method in enumerate(methods):
                grid = part[part.method == method].pivot(index="2m", columns="sbr", values=col)
                if grid.shape[0] < 2 or grid.shape[1] < 2:
                    continue
                ax.contour(grid.columns, grid.index, grid.values, levels=[level], colors=[f"C{k}"])
            ax.set_xscale("log")
            ax.set_xlabel("SBR")
            ax.set_ylabel("2m")
            ax.set_title(title)
        axes[0].legend(
            [plt.Line2D([], [], color=f"C{k}") for k in range(len(methods))], methods, fontsize=7, loc="upper right"
        )
        fig.tight_layout()
        fig.savefig(out / f"contour_n{n:g}.png", dpi=120)


def plot_ratio(df, name, out):
    for ref, part in df.groupby("reference"):
        grid = part.pivot(index="n", columns="sbr", values="R")
        fig, ax = plt.subplots(figsize=(5, 3.8))
        im = ax.imshow(grid.values, origin="lower", aspect="auto", cmap="RdBu_r", vmin=0, vmax=2)
        ax.set_xticks(range(len(grid.columns)), [f"{v:.2g}" for v in grid.columns], rotation=45)
        ax.set_yticks(range(len(grid.index)), [f"{v:g}" for v in grid.index])
        ax.set_xlabel("SBR")
        ax.set_ylabel("n")
        ax.set_title(f"R = RMSE sketch / RMSE {ref}")
        fig.colorbar(im, ax=ax)
        fig.tight_layout()
        fig.savefig(out / f"{name}_{ref}.png", dpi=120)


def plot_pulse(df, out):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for k, (method, s) in enumerate(df.groupby("method")):
        ax.loglog(s.sbr, s.rmse, marker="o", color=f"C{k}", label=f"{method} (sigma {s.sigma.iloc[0]:.3g})")
        finite = np.isfinite(s.crb)
        ax.loglog(s.sbr[finite], s.crb[finite], ls="--", color=f"C{k}")
    ax.set_xlabel("SBR")
    ax.set_ylabel("RMSE (bins)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out / "pulse_width.png", dpi=120)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("results", type=Path)
    p.add_argument("--out", type=Path)
    args = p.parse_args()
    out = args.out or args.results
    out.mkdir(parents=True, exist_ok=True)
    r = args.results
    if (r / "clt.csv").exists():
        plot_clt(pd.read_csv(r / "clt.csv"), pd.read_csv(r / "clt_errors.csv"), out)
    if (r / "rep.csv").exists():
        plot_rep(pd.read_csv(r / "rep.csv"), out)
    if (r / "contour.csv").exists():
        plot_contour(pd.read_csv(r / "contour.csv"), out)
    for name in ("starved", "ifft_compare"):
        if (r / f"{name}.csv").exists():
            plot_ratio(pd.read_csv(r / f"{name}.csv"), name, out)
    if (r / "pulse_width.csv").exists():
        plot_pulse(pd.read_csv(r / "pulse_width.csv"), out)


if __name__ == "__main__":
    main()
