"""Deterministic SVG plots for completed result directories."""

import csv
import json
import os

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402

_SVG_OPTS = {"metadata": {"Date": None, "Creator": None}}


def _configure():
    plt.rcParams["svg.hashsalt"] = "arborwalk"
    plt.rcParams["font.family"] = "DejaVu Sans"
    plt.rcParams["figure.figsize"] = (6.0, 4.0)


def _read_rows(result_dir: str):
    path = os.path.join(result_dir, "results.csv")
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def emit_plots(result_dir: str) -> list:
    """Render the plots appropriate to the result kind; returns file paths."""
    summary_path = os.path.join(result_dir, "summary.json")
    if not os.path.exists(summary_path):
        print(f"notice: no summary.json in {result_dir}, nothing to plot")
        return []
    with open(summary_path, encoding="utf-8") as fh:
        kind = json.load(fh)["kind"]
    rows = _read_rows(result_dir)
    if not rows:
        print(f"notice: empty result set in {result_dir}, no plots emitted")
        return []
    _configure()
    out = []

    def save(fig, name):
        path = os.path.join(result_dir, name)
        fig.savefig(path, **_SVG_OPTS)
        plt.close(fig)
        out.append(path)

    if kind in ("lyapunov", "diagram_q3"):
        rs = [float(r["r"]) for r in rows]
        gs = [float(r["gamma"]) for r in rows]
        es = [float(r["stderr"]) for r in rows]
        fig, ax = plt.subplots()
        ax.errorbar(rs, gs, yerr=es, marker="o", linestyle="-")
        ax.set_xlabel("r")
        ax.set_ylabel("Lyapunov exponent")
        ax.axhline(0.0, color="gray", linewidth=0.8)
        save(fig, "lyapunov.svg")
    elif kind == "green_moments":
        ds = [int(r["distance"]) for r in rows]
        lm = [float(r["log_mean"]) for r in rows]
        slope = float(rows[0]["slope"])
        fig, ax = plt.subplots()
        ax.plot(ds, lm, "o")
        inter = lm[0] - slope * ds[0]
        ax.plot(ds, [slope * d + inter for d in ds], "-",
                label=f"slope {slope:.3f}")
        ax.set_xlabel("distance")
        ax.set_ylabel("log mean |G|^s")
        ax.legend()
        save(fig, "green_moments.svg")
    elif kind in ("return_prob", "wiener"):
        ns = [int(r["n"]) for r in rows if r["realization"] == rows[0]["realization"]]
        ps = [float(r["prob"]) for r in rows if r["realization"] == rows[0]["realization"]]
        fig, ax = plt.subplots()
        ax.semilogy([n for n, p in zip(ns, ps) if p > 0],
                    [p for p in ps if p > 0], "o-", markersize=3)
        ax.set_xlabel("n")
        ax.set_ylabel("return probability")
        save(fig, f"{kind}.svg")
        if kind == "wiener":
            cs = [float(r["cesaro"]) for r in rows
                  if r["realization"] == rows[0]["realization"]]
            fig, ax = plt.subplots()
            ax.plot(ns, cs, "-")
            ax.set_xlabel("n")
            ax.set_ylabel("Cesaro mean of return probability")
            save(fig, "cesaro.svg")
    elif kind == "blocks":
        res = [float(r["residual"]) for r in rows]
        fig, ax = plt.subplots()
        ax.plot(range(len(res)), res, "o")
        ax.set_xlabel("block index")
        ax.set_ylabel("invariance residual")
        save(fig, "blocks.svg")
    elif kind == "covariance":
        res = [float(r["residual"]) for r in rows]
        fig, ax = plt.subplots()
        ax.plot(range(len(res)), res, "o")
        ax.set_xlabel("translation index")
        ax.set_ylabel("covariance residual")
        save(fig, "covariance.svg")
    elif kind == "diagram_q4":
        fig, ax = plt.subplots()
        xs = [float(r.get("psi", i)) for i, r in enumerate(rows)]
        cs = [float(r["cesaro"]) for r in rows]
        ax.plot(xs, cs, "o")
        ax.set_xlabel("psi")
        ax.set_ylabel("Cesaro mean")
        save(fig, "diagram_q4.svg")
    elif kind == "paths_audit":
        fig, ax = plt.subplots()
        st = [int(r["steps"]) for r in rows]
        mj = [int(r["max_j"]) for r in rows]
        bd = [int(r["bound"]) for r in rows]
        ax.plot(st, mj, "o-", label="max repeats")
        ax.plot(st, bd, "--", label="claimed bound")
        ax.set_xlabel("steps")
        ax.legend()
        save(fig, "paths_audit.svg")
    else:
        print(f"notice: no plot defined for kind {kind!r}")
    return out
