#  report.py - this file is part of the infantcry_tools package.
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


import logging
from dataclasses import dataclass
import pandas as pd
from ..common import defines
from ..common.exceptions import EmptyList, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CompressionEntry(object):
    """One evaluated model variant."""
    name: str
    accuracy: float
    serialized_bytes: int


def compression_report(entries, path=None):
    """Size / accuracy table of model variants.

    Rows keep the given order; `ratio` is each size over the size of the
    first entry (the reference).

    Parameters
    ----------
    entries : list[CompressionEntry]
        evaluated variants, reference first
    path : str, optional
        if given, the table is written there as CSV (default : None)

    Returns
    -------
    pandas DataFrame
        columns name, accuracy, bytes, ratio
    """
    if len(entries) == 0:
        raise EmptyList("Compression report needs at least one model.")
    reference = entries[0].serialized_bytes
    if reference <= 0:
        raise ValidationError("Reference model {} has no bytes.".format(entries[0].name))
    df = pd.DataFrame({
        "name": [e.name for e in entries],
        "accuracy": [float(e.accuracy) for e in entries],
        "bytes": [int(e.serialized_bytes) for e in entries],
        "ratio": [e.serialized_bytes / reference for e in entries]
    }, columns=defines.COMPRESSION_COLUMNS)
    if path is not None:
        df.to_csv(path, index=False)
        logger.info("Compression report with %d rows written to %s", len(df), path)

    return df
