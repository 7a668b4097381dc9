"""Figures written next to the text reports of the command line."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}

# Keeps PNG bytes identical between runs.
_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def plot_loss_trace(trace, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.6))
        ax.plot(np.arange(len(trace)), trace, lw=1.2, color="k")
        ax.set_yscale("log")
        ax.set_xlabel("step")
        ax.set_ylabel("masked ab MSE")
        return _save(fig, path)


def plot_keep_ratio_curve(ratios, mse, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.6))
        ax.plot(100 * np.asarray(ratios), mse, "o-", color="k", lw=1.2, ms=4)
        ax.set_xlabel("coloured pixels kept (%)")
        ax.set_ylabel("reconstruction MSE")
        return _save(fig, path)


def plot_check_summary(results, path):
    """Horizontal bars of log10(value / limit) per check; left of 0 is passing."""
    names = [r.name for r in results]
    tiny = 1e-300
    ratio = []
    for r in results:
        if r.name.startswith("euclidean"):
            ratio.append(np.log10(max(r.limit, tiny) / max(r.value, tiny)))
        else:
            ratio.append(np.log10(max(r.value, tiny) / max(r.limit, 1e-16)) if r.value > 0 else -16.0)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 0.25 * len(names) + 1.0))
        colors = ["0.3" if r.passed else "tab:red" for r in results]
        ax.barh(np.arange(len(names)), np.clip(ratio, -16, 4), color=colors)
        ax.axvline(0.0, color="k", lw=0.8)
        ax.set_yticks(np.arange(len(names)), names)
        ax.invert_yaxis()
        ax.set_xlabel("log10(value / limit)")
        return _save(fig, path)


def plot_colorization(panels, path):
    """``panels`` is a list of ``(title, rgb_image)``."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(panels), figsize=(2.2 * len(panels), 2.4))
        for ax, (title, img) in zip(np.atleast_1d(axes), panels):
            ax.imshow(np.clip(img, 0, 1), interpolation="nearest")
            ax.set_title(title)
            ax.set_axis_off()
        return _save(fig, path)


def plot_mask(mask, path, title="propagated mask"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.0, 3.0))
        ax.imshow(mask, cmap="gray", vmin=0, vmax=1, interpolation="nearest")
        ax.set_title(title)
        ax.set_axis_off()
        return _save(fig, path)
