"""Score and training-log reports: fixed-order text tables, one-line
key=value output, tab-separated files, and figures rendered to PNG."""

from __future__ import annotations

from pathlib import Path


def format_score_table(scores, order=None):
    """Plain-text table, one '<metric>  <value to 4 decimals>' row."""
    keys = list(order) if order else sorted(scores)
    width = max(len(k) for k in keys)
    lines = [f"{k.ljust(width)}  {scores[k]:.4f}" for k in keys]
    return "\n".join(lines) + "\n"


def format_score_line(scores, order=None):
    """Machine-readable single line: key=value pairs."""
    keys = list(order) if order else sorted(scores)
    return " ".join(f"{k}={scores[k]:.4f}" for k in keys) + "\n"


def write_scores_tsv(path, scores, order=None):
    keys = list(order) if order else sorted(scores)
    Path(path).write_text(
        "".join(f"{k}\t{scores[k]:.4f}\n" for k in keys), encoding="utf-8"
    )


def save_score_figure(path, scores, title, order=None):
    """Bar chart of metric values, written as a PNG next to the text output."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    keys = list(order) if order else sorted(scores)
    values = [scores[k] for k in keys]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(keys)), 3.2))
    bars = ax.bar(range(len(keys)), values, color="#4878a8")
    ax.set_xticks(range(len(keys)))
    ax.set_xticklabels(keys, rotation=30, ha="right", fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title(title)
    for bar, value in zip(bars, values):
        ax.text(bar.get_x() + bar.get_width() / 2, value + 0.01,
                f"{value:.3f}", ha="center", va="bottom", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_training_log(path, rows):
    """rows: (epoch, loss, dev_metric) tuples; tab-separated with header."""
    lines = ["epoch\tloss\tdev_metric"]
    for epoch, loss, dev in rows:
        dev_txt = "nan" if dev != dev else f"{dev:.4f}"
        lines.append(f"{epoch}\t{loss:.6f}\t{dev_txt}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_training_figure(path, rows, title):
    """Loss curve (and dev metric when present) per epoch, as a PNG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = [r[0] for r in rows]
    losses = [r[1] for r in rows]
    devs = [r[2] for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(epochs, losses, "o-", color="#4878a8", label="training loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(title)
    if any(d == d for d in devs):
        ax2 = ax.twinx()
        ax2.plot(epochs, devs, "s--", color="#a85448", label="dev metric")
        ax2.set_ylabel("dev metric")
        ax2.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
