"""PNG figures for keywordify reports and training logs (Agg backend, no display needed)."""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.2),
    "figure.dpi": 100,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}
# no Software/date chunk, so identical data gives identical bytes
_PNG_META = {"Software": None}


def _save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path


def length_histogram(lengths, path, max_len=8, title="keyword query length"):
    """Bar chart of ``{length: count}``; the dashed line marks the length budget."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        xs = sorted(int(k) for k in lengths)
        ax.bar(xs, [lengths[k] if k in lengths else lengths[str(k)] for k in xs], color="#4c72b0", width=0.8)
        ax.axvline(max_len + 0.5, color="0.4", ls="--", lw=1)
        ax.set_xlabel("tokens after pruning")
        ax.set_ylabel("queries")
        ax.set_title(title)
        return _save(fig, path)


def training_curves(rows, path, title="training"):
    """Loss per epoch, plus EM/F1 on a twin axis when the rows carry them."""
    epochs = [int(r["epoch"]) for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(epochs, [float(r["loss"]) for r in rows], color="#c44e52", label="loss")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.xaxis.set_major_locator(MaxNLocator(integer=True))
        scored = [r for r in rows if r.get("em") not in (None, "")]
        if scored:
            ax2 = ax.twinx()
            ax2.plot([int(r["epoch"]) for r in scored], [float(r["em"]) for r in scored], color="#4c72b0", label="EM")
            ax2.plot([int(r["epoch"]) for r in scored], [float(r["f1"]) for r in scored], color="#55a868",
                     ls=":", label="F1")
            ax2.set_ylabel("dev score (%)")
            ax2.set_ylim(0, 100)
            ax2.grid(False)
            lines = ax.get_lines() + ax2.get_lines()
            ax.legend(lines, [ln.get_label() for ln in lines], loc="center right", frameon=False)
        ax.set_title(title)
        return _save(fig, path)
