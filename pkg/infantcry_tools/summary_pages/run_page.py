#  run_page.py - this file is part of the infantcry_tools package.
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
import sys
import pandas as pd
from ..html import html_builder as hb
from ..utils import file_utils
from ..common import defines


PIPELINE_SCRIPT_NAME = "infantcry"
PLOT_EXT = "png"


def _relative_link(page, name, prepend_path):
    return page.get_formatted_link(name, href=os.path.join(prepend_path, name),
                                   download=os.path.join(prepend_path, name))


def _metrics_items(metrics):
    items = {
        "Accuracy": "{:.4f}".format(metrics[defines.ACCURACY_KEY]),
        "Evaluated clips": metrics[defines.COUNT_KEY]
    }
    for label, acc in zip(metrics[defines.LABELS_KEY], metrics[defines.PER_CLASS_KEY]):
        items["Accuracy ({})".format(label)] = "n/a" if acc is None else "{:.4f}".format(acc)
    return items


def generate_web_page(res_path, title="Infant cry run summary", prepend_path=""):
    """Summary page of a run folder.

    Shows whatever the folder holds among the compression report, the pooling
    and architecture sweeps, run metrics with their plots and the metrics of
    sub-runs.

    Parameters
    ----------
    res_path : str
        run folder
    title : str, optional
        page title
    prepend_path : str, optional
        path to be prepended to the relative path of images and
        files in the current page (default : "")

    Returns
    -------
    str
        path of the saved page
    """
    page = hb.HtmlBuilder(title=title)

    # info
    page.add_section(defines.INFO_SECTION)
    page.open_div(id_="info-list")
    info_dict = {"Run folder": page.get_formatted_code(os.path.abspath(res_path))}
    if os.path.exists(os.path.join(res_path, defines.CONFIG_NAME)):
        info_dict["Configuration"] = _relative_link(page, defines.CONFIG_NAME, prepend_path)
    info_dict["Environment"] = page.get_formatted_code(sys.prefix)
    page.add_bullet_list(info_dict)
    page.add_command_line("{} report --out {}".format(PIPELINE_SCRIPT_NAME, res_path))
    page.close_div()

    # compression
    compression_csv = os.path.join(res_path, defines.COMPRESSION_NAME)
    if os.path.exists(compression_csv):
        page.add_section(defines.COMPRESSION_SECTION)
        table = pd.read_csv(compression_csv)
        table["size reduction"] = ["{:.1f}%".format(100.0 * (1.0 - r)) for r in table["ratio"]]
        page.add_table(table)
        page.add_paragraph(_relative_link(page, defines.COMPRESSION_NAME, prepend_path))

    # sweeps
    for csv_name, section in [(defines.POOLSWEEP_NAME, defines.POOLSWEEP_SECTION),
                              (defines.ARCHSWEEP_NAME, defines.ARCHSWEEP_SECTION)]:
        csv_path = os.path.join(res_path, csv_name)
        if os.path.exists(csv_path):
            page.add_section(section)
            page.add_table(pd.read_csv(csv_path))
            page.add_paragraph(_relative_link(page, csv_name, prepend_path))

    # run metrics
    metrics_file = os.path.join(res_path, defines.METRICS_NAME)
    if os.path.exists(metrics_file):
        page.add_section(defines.RESULTS_SECTION)
        page.open_div(id_="results")
        page.add_bullet_list(_metrics_items(file_utils.load_metrics(metrics_file)))
        for plot_name in [file_utils.loss_plot_name(PLOT_EXT), file_utils.confusion_plot_name(PLOT_EXT)]:
            if os.path.exists(os.path.join(res_path, plot_name)):
                page.add_plot(os.path.join(prepend_path, plot_name), os.path.splitext(plot_name)[0])
        page.close_div()

    clips_plot = file_utils.clip_plot_name(PLOT_EXT)
    if os.path.exists(os.path.join(res_path, clips_plot)):
        page.add_section(defines.FIGURES_SECTION)
        page.add_plot(os.path.join(prepend_path, clips_plot), "clips")

    # sub-runs (pooling sweep, architecture sweep)
    sub_runs = file_utils.get_run_folders(res_path, must_include=[defines.METRICS_NAME])
    if len(sub_runs) > 0:
        page.add_section("Runs")
        page.open_div(id_="runs")
        for run in sub_runs:
            metrics = file_utils.load_metrics(os.path.join(res_path, run, defines.METRICS_NAME))
            color = "success" if metrics[defines.ACCURACY_KEY] >= 0.9 else "warning"
            page.open_card("{} (accuracy {:.4f})".format(run, metrics[defines.ACCURACY_KEY]), color, run)
            page.add_bullet_list(_metrics_items(metrics))
            page.close_card()
        page.close_div()

    html_file = os.path.join(res_path, defines.PAGE_NAME)
    page.save_page(html_file, add_footer=True)

    return html_file
