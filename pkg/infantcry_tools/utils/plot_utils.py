#  plot_utils.py - this file is part of the infantcry_tools package.
#  Copyright (C) 2024- infantcry_tools developers
#
#  This program is free software: you can redistribute it and/or modify
#  it under the terms of the GNU General Public License as published by
#  the Free Software Foundation, either version 3 of the License, or
#  (at your option) any later version.
#
#  This program is distributed in the hope that it will be useful,
#  but WITHOUT ANY WARRANTY; without even the implied warranty of
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
#  GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License
#  along with this program. If not, see <https://www.gnu.org/licenses/>.


import os
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
from ..utils import file_utils
from ..common import defines


def plot_clips(clips, features, titles, out_folder, save_ext="png", figsize=None):
    """Waveform (top) and log-mel spectrogram (bottom) of clips side by side.

    Parameters
    ----------
    clips : list[AudioClip]
        clips to show
    features : list[numpy ndarray]
        their log-mel matrices (frames, mels)
    titles : list[str]
        column titles
    out_folder : str
        where to save the plot
    save_ext : str, optional
        plot extension (default : png)
    figsize : tuple[int], optional
        figure size (default : None)

    Returns
    -------
    str
        plot path
    """
    n = len(clips)
    font_size = 16
    if figsize is None:
        figsize = (6 * n, 8)
    fig, axes = plt.subplots(2, n, figsize=figsize, squeeze=False)
    for i in range(n):
        clip = clips[i]
        t = np.arange(len(clip)) / clip.sample_rate_hz
        axes[0, i].plot(t, clip.samples, "b-", linewidth=0.5)
        axes[0, i].set_ylim(-1, 1)
        axes[0, i].set_xlabel("Time [s]", fontsize=font_size)
        axes[0, i].set_ylabel("Amplitude", fontsize=font_size)
        axes[0, i].set_title(titles[i], fontsize=font_size)
        axes[0, i].grid(True)

        frames = features[i].shape[0]
        extent = [0, frames * defines.HOP_LEN / defines.SAMPLE_RATE, 0, features[i].shape[1]]
        axes[1, i].imshow(features[i].T, origin="lower", aspect="auto", cmap="viridis", extent=extent)
        axes[1, i].set_xlabel("Time [s]", fontsize=font_size)
        axes[1, i].set_ylabel("Mel band", fontsize=font_size)
    plt.tight_layout()
    plot_name = os.path.join(out_folder, file_utils.clip_plot_name(save_ext))
    plt.savefig(plot_name, bbox_inches="tight", dpi=100)
    plt.close("all")

    return plot_name


def plot_loss_curve(loss_curve, out_folder, eval_curve=None, save_ext="png", figsize=None):
    """Train loss per epoch, with the eval accuracy on a second axis."""
    font_size = 16
    epochs = np.arange(1, len(loss_curve) + 1)
    fig, ax1 = plt.subplots() if figsize is None else plt.subplots(figsize=figsize)
    lines = ax1.plot(epochs, loss_curve, "r-o", label="Train loss")
    ax1.set_xlabel("Epoch", fontsize=font_size)
    ax1.set_ylabel("Loss", color="r", fontsize=font_size)
    ax1.grid(True)
    if eval_curve:
        ax2 = ax1.twinx()
        lines += ax2.plot(epochs[:len(eval_curve)], eval_curve, "b-s", label="Eval accuracy")
        ax2.set_ylim(0, 1)
        ax2.set_ylabel("Accuracy", color="b", fontsize=font_size)
        ax2.grid(False)
    plt.legend(lines, [line.get_label() for line in lines], loc="center right")
    plot_name = os.path.join(out_folder, file_utils.loss_plot_name(save_ext))
    plt.savefig(plot_name, bbox_inches="tight", dpi=100)
    plt.close("all")

    return plot_name


def plot_confusion_matrix(confusion, labels, out_folder, save_ext="png", figsize=None):
    """Confusion matrix, true classes on rows."""
    font_size = 16
    cm = np.asarray(confusion)
    fig, ax = plt.subplots() if figsize is None else plt.subplots(figsize=figsize)
    ax.imshow(cm, cmap="Blues")
    ticks = np.arange(len(labels))
    ax.set_xticks(ticks)
    ax.set_yticks(ticks)
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_yticklabels(labels)
    thr = cm.max() / 2.0 if cm.size > 0 else 0
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            ax.text(j, i, "{:d}".format(int(cm[i, j])), ha="center", va="center",
                    color="white" if cm[i, j] > thr else "black")
    ax.set_xlabel("Predicted", fontsize=font_size)
    ax.set_ylabel("True", fontsize=font_size)
    plt.tight_layout()
    plot_name = os.path.join(out_folder, file_utils.confusion_plot_name(save_ext))
    plt.savefig(plot_name, bbox_inches="tight", dpi=100)
    plt.close("all")

    return plot_name
