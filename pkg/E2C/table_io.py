"""CSV tables in and out of the package, through astropy.table"""

import datetime
import logging

import numpy as np
from astropy.io import ascii
from astropy.table import Table

from E2C.exceptions import DataFormatError

log = logging.getLogger(__name__)

# Header line + 1, in a file without leading comment lines
FIRST_DATA_LINE = 2

COMMENT = '#'


def read_csv(filename, required_columns=()):
    """
    Read a CSV file with a header line. Lines starting with "#" are comments (kept in table.meta['comments']),
    empty cells are returned as masked values.

    :param filename: path of the file (UTF-8)
    :param required_columns: names that must appear in the header
    :return: an astropy Table
    """

    try:

        table = Table.read(filename, format='ascii.csv', encoding='utf-8', guess=False, comment=COMMENT)

    except (ascii.InconsistentTableError, ValueError, UnicodeDecodeError) as e:

        raise DataFormatError("Malformed CSV file %s: %s" % (filename, e))

    except OSError as e:

        raise DataFormatError("Cannot read %s: %s" % (filename, e))

    missing = [name for name in required_columns if name not in table.colnames]

    if len(missing) > 0:

        raise DataFormatError("File %s is missing the required column(s) %s" % (filename, ", ".join(missing)))

    log.info("Read %s rows from %s" % (len(table), filename))

    return table


def first_data_line(table):
    """File line (1-based) of the first row of a table read by read_csv"""

    return FIRST_DATA_LINE + len(table.meta.get('comments', []))


def cell(table, name, row):
    """
    Value of a cell, or None when the cell is empty (masked) or the column is absent

    :param table: an astropy Table
    :param name: column name
    :param row: 0-based row index
    :return: the value (numpy scalar or str) or None
    """

    if name not in table.colnames:

        return None

    value = table[name][row]

    if np.ma.is_masked(value):

        return None

    if isinstance(value, (str, np.str_)) and value.strip() == '':

        return None

    return value


def float_cell(table, name, row):
    """Numeric value of a cell (None when empty); unparseable text raises a DataFormatError naming the line"""

    value = cell(table, name, row)

    if value is None:

        return None

    try:

        return float(value)

    except (TypeError, ValueError):

        raise DataFormatError("Line %s, column %s: cannot read '%s' as a number"
                              % (row + first_data_line(table), name, value))


def provenance_comments(provenance, extra=()):
    """Comment lines echoing the configuration; the timestamp is the only line that changes between runs"""

    comments = ["created: %s" % datetime.datetime.now().isoformat(timespec='seconds')]

    comments.extend("%s = %s" % (key, value) for key, value in list(provenance) + list(extra))

    return comments


def write_csv(table, filename, provenance=(), extra=()):
    """
    Write a table as CSV, preceded by '#' provenance lines

    :param table: an astropy Table
    :param filename: output path
    :param provenance: (key, value) pairs, typically RunConfig.provenance()
    :param extra: further (key, value) pairs for the header (notes about the content)
    """

    table = table.copy(copy_data=False)

    table.meta['comments'] = provenance_comments(provenance, extra)

    table.write(filename, format='ascii.csv', comment='# ', overwrite=True)

    log.info("Wrote %s rows to %s" % (len(table), filename))
