#  html_builder.py - this file is part of the infantcry_tools package.
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
import datetime
from getpass import getuser
from MarkupPy import markup
from pytz import reference
from .. import __version__


PACKAGE_NAME = "infantcry_tools"

CSS_FILES = ["https://cdn.jsdelivr.net/npm/bootstrap@4.5.3/dist/css/bootstrap.min.css"]

JS_FILES = ["https://code.jquery.com/jquery-3.5.1.min.js",
            "https://cdn.jsdelivr.net/npm/bootstrap@4.5.3/dist/js/bootstrap.bundle.min.js"]


def _attributes(attrs):
    return "".join(" {}=\"{}\"".format(k, v) for k, v in attrs.items())


class HtmlBuilder(object):
    """Bootstrap page assembled with MarkupPy, one component per call.

    Parameters
    ----------
    title : str
        page title, also shown as the heading
    kwargs : dict{str}
        extra `markup.page.init` arguments
    """

    def __init__(self, title="", **kwargs):
        self.page = markup.page()
        self.page.init(title=title, css=CSS_FILES, script=JS_FILES, charset="utf-8", **kwargs)
        self.page.div(class_="container")
        if title != "":
            self.page.h1(title, class_="mt-2 mb-2")

    def add_paragraph(self, text, **kwargs):
        self.page.p(text, **kwargs)

    def get_formatted_link(self, text, **kwargs):
        """Inline <a> element; `kwargs` become its attributes."""
        return "<a{}>{}</a>".format(_attributes(kwargs), text)

    def get_formatted_code(self, text):
        return "<code>{}</code>".format(text)

    def open_div(self, **kwargs):
        self.page.div(**kwargs)

    def close_div(self):
        self.page.div.close()

    def add_section(self, title):
        """Section heading (bold, 180%)."""
        self.add_paragraph("<strong>{}</strong>".format(title), style="font-size:180%;", class_="mt-2 mb-2")

    def add_bullet_list(self, items):
        """Unordered list of `key: value` entries.

        Parameters
        ----------
        items : dict
            entries, shown in insertion order
        """
        self.page.ul()
        self.page.li(["<strong>{}</strong>: {}".format(k, v) for k, v in items.items()])
        self.page.ul.close()

    def add_table(self, df, float_format="{:.4f}"):
        """Striped table of a pandas DataFrame.

        Parameters
        ----------
        df : pandas DataFrame
            table content
        float_format : str, optional
            format of float cells (default : {:.4f})
        """
        self.open_div(class_="table-responsive")
        self.page.add(df.to_html(index=False, classes="table table-sm table-striped", border=0,
                                 float_format=float_format.format))
        self.close_div()

    def add_command_line(self, code):
        """Grey box holding the command that regenerates the page."""
        self.open_div(class_="highlight", style_="background: #f8f8f8")
        self.page.pre(style="line-height: 125%;")
        self.page.span(code)
        self.page.pre.close()
        self.close_div()

    def open_card(self, title, color, target_id):
        """Open a collapsible card; its body is shown when the header is clicked.

        Parameters
        ----------
        title : str
            header text
        color : str
            bootstrap context color (success, warning, ...)
        target_id : str
            id of the collapsible body
        """
        self.open_div(class_="card border-{} mb-1 shadow-sm".format(color))
        self.open_div(class_="card-header text-white bg-{}".format(color))
        self.page.a(title, **{"class": "btn card-link text-white", "data-toggle": "collapse",
                              "data-target": "#{}".format(target_id)})
        self.close_div()
        self.open_div(id_=target_id, class_="collapse")
        self.open_div(class_="card-body")

    def close_card(self):
        for _ in range(3):
            self.close_div()

    def add_plot(self, plot_name, plot_id):
        """Half-width image linking to the full-size file."""
        self.page.a(href=plot_name, id_="a-{}".format(plot_id), target="_blank")
        self.page.img(id_="img-{}".format(plot_id), src=plot_name, alt=os.path.basename(plot_name),
                      style="height: 50%; width: 50%; object-fit: contain")
        self.page.a.close()

    def add_footer(self):
        """Footer naming user, local time and package version."""
        self.page.twotags.append("footer")
        markup.element("footer", case=self.page.case, parent=self.page)(class_="footer mt-4")
        self.open_div(class_="container")
        now = datetime.datetime.now()
        stamp = now.strftime("%H:%M {} on %d %B %Y".format(reference.LocalTimezone().tzname(now)))
        self.add_paragraph("Created by {} at {} with {} {}".format(getuser(), stamp, PACKAGE_NAME, __version__),
                           class_="text-muted")
        self.close_div()
        markup.element("footer", case=self.page.case, parent=self.page).close()

    def render(self, add_footer=False):
        """Close the page and return its HTML text."""
        self.close_div()
        if add_footer:
            self.add_footer()
        if not self.page._full:
            self.page.body.close()
            self.page.html.close()
        return str(self.page())

    def save_page(self, path, add_footer=False):
        with open(path, "w") as f:
            f.write(self.render(add_footer))
