"""Render figures from the engine's result files (JSON explain, CSV fidelity).

Plots consume only serialized CLI outputs, never in-process objects, so the
file-format contract stays honest. Inputs are validated structurally and a
SchemaError aborts the render.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

PLOT_KINDS = ("heatmap", "importance_bars", "gaussian_density", "fidelity_curves")

_LINESTYLES = {"A": "-", "B": "--", "C": ":"}


class SchemaError(Exception):
    """The input file does not match the engine's published format."""


@dataclass
class PlotJob:
    input_path: str
    kind: str
    output_path: str


def _load_explain(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot parse {path!r}: {exc}") from exc
    if not isinstance(payload, dict) or "results" not in payload or "provenance" not in payload:
        raise SchemaError("explain JSON needs 'provenance' and 'results'")
    for entry in payload["results"]:
        for key in ("player", "family", "distribution", "stats"):
            if key not in entry:
                raise SchemaError(f"result entry missing {key!r}")
    return payload


def render(job: PlotJob) -> str:
    """Write the figure for the job; returns the output path."""
    if job.kind not in PLOT_KINDS:
        raise SchemaError(f"unknown plot kind {job.kind!r}")
    fig = _RENDERERS[job.kind](job.input_path)
    fig.savefig(job.output_path, dpi=130)
    plt.close(fig)
    return job.output_path


def _render_heatmap(path: str):
    payload = _load_explain(path)
    results = [r for r in payload["results"] if r["family"] == "categorical"]
    if not results:
        raise SchemaError("heatmap needs categorical results")
    cols = min(len(results), 4)
    rows = (len(results) + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 3.0 * rows), squeeze=False)
    for ax in axes.ravel()[len(results):]:
        ax.axis("off")
    for ax, entry in zip(axes.ravel(), results):
        q = np.asarray(entry["distribution"]["transition"], dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise SchemaError("transition matrix must be square")
        im = ax.imshow(q, cmap="viridis", vmin=0.0)
        d = q.shape[0]
        for r in range(d):
            ax.text(
                r,
                r,
                "no\nchange",
                ha="center",
                va="center",
                fontsize=6,
                color="white",
            )
        ax.set_title(f"player {entry['player']}", fontsize=9)
        ax.set_xlabel("from class")
        ax.set_ylabel("to class")
        fig.colorbar(im, ax=ax, shrink=0.8)
    fig.suptitle("transition probabilities", fontsize=11)
    fig.tight_layout()
    return fig


def _render_importance(path: str):
    payload = _load_explain(path)
    pairs = [
        (entry["player"], float(entry["stats"]["importance"]))
        for entry in payload["results"]
    ]
    pairs.sort(key=lambda t: (-t[1], t[0]))
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(pairs) + 2), 3.2))
    labels = [str(p) for p, _ in pairs]
    ax.bar(labels, [v for _, v in pairs], color="tab:blue")
    ax.set_xlabel("player")
    ax.set_ylabel("importance  1 - q(0)")
    ax.set_ylim(0.0, 1.05)
    fig.tight_layout()
    return fig


def _render_gaussian(path: str):
    payload = _load_explain(path)
    results = [r for r in payload["results"] if r["family"] == "gaussian"]
    if not results:
        raise SchemaError("gaussian_density needs gaussian results")
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    span = 1.0
    for entry in results:
        comps = entry["distribution"]["components"]
        for c in comps:
            span = max(span, abs(c["mean"]) + 4.0 * c["sd"])
    grid = np.linspace(-span, span, 801)
    for entry in results:
        comps = entry["distribution"]["components"]
        pdf = np.zeros_like(grid)
        for c in comps:
            if c["sd"] > 0.0:
                z = (grid - c["mean"]) / c["sd"]
                pdf += c["weight"] * np.exp(-0.5 * z * z) / (c["sd"] * np.sqrt(2 * np.pi))
        line = ax.plot(grid, pdf, label=f"player {entry['player']}")[0]
        for c in comps:
            if c["sd"] == 0.0 and c["weight"] > 0.0:
                ax.vlines(
                    c["mean"], 0.0, c["weight"], color=line.get_color(), linestyles=":"
                )
    ax.set_xlabel("marginal contribution")
    ax.set_ylabel("density / point mass")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _render_fidelity(path: str):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise SchemaError(f"cannot read {path!r}: {exc}") from exc
    needed = {"step", "scheme", "removed_player", "p_c1", "p_c2"}
    if not rows or not needed.issubset(rows[0]):
        raise SchemaError(f"fidelity CSV needs columns {sorted(needed)}")
    by_scheme: dict[str, list] = {}
    for row in rows:
        by_scheme.setdefault(row["scheme"], []).append(
            (int(row["step"]), float(row["p_c1"]), float(row["p_c2"]))
        )
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for scheme, entries in sorted(by_scheme.items()):
        entries.sort()
        steps = [e[0] for e in entries]
        style = _LINESTYLES.get(scheme, "-")
        ax.plot(steps, [e[1] for e in entries], style, color="tab:blue", label=f"{scheme}: P(c1)")
        ax.plot(steps, [e[2] for e in entries], style, color="tab:orange", label=f"{scheme}: P(c2)")
    ax.set_xlabel("players removed")
    ax.set_ylabel("class probability")
    ax.legend(fontsize=7, ncol=3)
    fig.tight_layout()
    return fig


_RENDERERS = {
    "heatmap": _render_heatmap,
    "importance_bars": _render_importance,
    "gaussian_density": _render_gaussian,
    "fidelity_curves": _render_fidelity,
}
