"""Ingest firm snapshots, engineer the forest features and split the panel into in-sample and out-of-sample sets.

The firm-snapshot CSV has one row per (firm, date) and the columns listed in SNAPSHOT_COLUMNS; an empty cell is a
missing value."""

import datetime
import logging
import math
from collections import Counter, namedtuple
from dataclasses import dataclass, field

import numpy as np

from E2C import fundamentals, structural
from E2C.exceptions import CompatibilityError, DataFormatError, DomainError, PipelineError
from E2C.ratings import merge_ratings, rating_bucket, rating_notch
from E2C.table_io import cell, first_data_line, float_cell, read_csv

log = logging.getLogger(__name__)

HISTORICAL_VOL_COLUMNS = tuple('hist_vol_%s' % w for w in fundamentals.HISTORICAL_WINDOWS)
IMPLIED_VOL_COLUMNS = tuple('impl_vol_%sm' % m for m in fundamentals.IMPLIED_MATURITIES)

BALANCE_SHEET_COLUMNS = ('long_term_debt', 'short_term_debt', 'other_lt_liabilities', 'other_st_liabilities',
                         'lease_obligations', 'minority_interest', 'preferred_equity')

REQUIRED_COLUMNS = (('firm_id', 'date', 'stock_price', 'market_cap', 'fx_rate', 'is_banking')
                    + BALANCE_SHEET_COLUMNS
                    + ('sp_rating', 'moody_rating', 'sector', 'country', 'ig_cdx_bps', 'cds_5y_bps'))

SNAPSHOT_COLUMNS = REQUIRED_COLUMNS[:13] + HISTORICAL_VOL_COLUMNS + IMPLIED_VOL_COLUMNS + REQUIRED_COLUMNS[13:]

NUMERIC = 'numeric'
ORDINAL = 'ordinal'
DUMMY = 'dummy'

NUMERIC_FEATURES = ('e2c_bps', 'ig_cdx_bps', 'market_cap')
ORDINAL_FEATURES = ('rating',)
CATEGORICAL_GROUPS = ('country', 'sector')

_TRUE = ('1', 'true', 'yes', 'y', 't')
_FALSE = ('0', 'false', 'no', 'n', 'f')


@dataclass(frozen=True)
class FirmSnapshot:
    """One firm on one date, as read from the firm-snapshot CSV (None = missing)"""

    firm_id: str
    date: datetime.date
    stock_price: float = None
    market_cap: float = None
    fx_rate: float = None
    is_banking: bool = None
    balance_sheet: dict = field(default_factory=dict)
    historical_vols: dict = field(default_factory=dict)
    implied_vols: dict = field(default_factory=dict)
    sp_rating: str = None
    moody_rating: str = None
    sector: str = None
    country: str = None
    ig_cdx_bps: float = None
    cds_5y_bps: float = None
    line: int = None


def _flag(value, line):

    if value is None:

        return None

    text = str(value).strip().lower()

    if text in _TRUE:

        return True

    if text in _FALSE:

        return False

    raise DataFormatError("Line %s, column is_banking: cannot read '%s' as a flag" % (line, value))


def _date(value, line):

    try:

        return datetime.date.fromisoformat(str(value).strip()[:10])

    except ValueError:

        raise DataFormatError("Line %s, column date: '%s' is not an ISO-8601 date" % (line, value))


def _text(table, name, row):

    value = cell(table, name, row)

    return None if value is None else str(value).strip()


def read_snapshots(filename):
    """
    Read the firm-snapshot CSV

    :param filename: path of the CSV file
    :return: list of FirmSnapshot, in file order
    """

    return snapshots_from_table(read_csv(filename, REQUIRED_COLUMNS))


def snapshots_from_table(table):
    """Snapshots of an already read table (one per row, same order)"""

    snapshots = []

    seen = {}

    offset = first_data_line(table)

    for i in range(len(table)):

        line = i + offset

        firm_id = _text(table, 'firm_id', i)
        date = cell(table, 'date', i)

        if firm_id is None or date is None:

            raise DataFormatError("Line %s: firm_id and date are mandatory" % line)

        date = _date(date, line)

        if (firm_id, date) in seen:

            raise DataFormatError("Line %s: firm %s on %s already appears at line %s"
                                  % (line, firm_id, date, seen[(firm_id, date)]))

        seen[(firm_id, date)] = line

        for name in ('sp_rating', 'moody_rating'):

            try:

                rating_notch(_text(table, name, i))

            except DataFormatError as e:

                raise DataFormatError("Line %s, column %s: %s" % (line, name, e))

        historical = {w: float_cell(table, c, i) for w, c in zip(fundamentals.HISTORICAL_WINDOWS,
                                                                  HISTORICAL_VOL_COLUMNS)}
        implied = {m: float_cell(table, c, i) for m, c in zip(fundamentals.IMPLIED_MATURITIES, IMPLIED_VOL_COLUMNS)}

        snapshots.append(FirmSnapshot(firm_id=firm_id,
                                      date=date,
                                      stock_price=float_cell(table, 'stock_price', i),
                                      market_cap=float_cell(table, 'market_cap', i),
                                      fx_rate=float_cell(table, 'fx_rate', i),
                                      is_banking=_flag(cell(table, 'is_banking', i), line),
                                      balance_sheet={c: float_cell(table, c, i) for c in BALANCE_SHEET_COLUMNS},
                                      historical_vols={k: v for k, v in historical.items() if v is not None},
                                      implied_vols={k: v for k, v in implied.items() if v is not None},
                                      sp_rating=_text(table, 'sp_rating', i),
                                      moody_rating=_text(table, 'moody_rating', i),
                                      sector=_text(table, 'sector', i),
                                      country=_text(table, 'country', i),
                                      ig_cdx_bps=float_cell(table, 'ig_cdx_bps', i),
                                      cds_5y_bps=float_cell(table, 'cds_5y_bps', i),
                                      line=line))

    return snapshots


SpreadDerivation = namedtuple('SpreadDerivation', ['financial_debt', 'debt_per_share', 'selected_vol', 'e2c_bps',
                                                   'creditgrades_bps'])


def derive_spreads(snapshot, params):
    """
    Compute the E2C and CreditGrades spreads of a snapshot from its fundamentals

    :param snapshot: a FirmSnapshot
    :param params: a structural.ModelParams
    :return: a SpreadDerivation
    :raise DomainError: if an input is missing or outside its domain (the message is the reason)
    """

    if snapshot.is_banking is None:

        raise DomainError("missing is_banking")

    items = dict(snapshot.balance_sheet)

    # Banks only need their long term debt
    needed = ('long_term_debt', 'minority_interest', 'preferred_equity') if snapshot.is_banking \
        else BALANCE_SHEET_COLUMNS

    for name in BALANCE_SHEET_COLUMNS:

        if items.get(name) is None:

            if name in needed:

                raise DomainError("missing %s" % name)

            items[name] = 0.0

    for name in ('stock_price', 'market_cap', 'fx_rate'):

        if getattr(snapshot, name) is None:

            raise DomainError("missing %s" % name)

    balance_sheet = fundamentals.BalanceSheet(is_banking=snapshot.is_banking, **items)

    market = fundamentals.MarketState(stock_price=snapshot.stock_price, market_cap=snapshot.market_cap,
                                      fx_report_to_quote=snapshot.fx_rate)

    quotes = fundamentals.VolatilityQuotes(historical=snapshot.historical_vols, implied=snapshot.implied_vols)

    fin_debt = fundamentals.financial_debt(balance_sheet)
    dps = fundamentals.debt_per_share(fin_debt, balance_sheet, market)
    vol = fundamentals.select_volatility(quotes)

    inputs = structural.SpreadInputs(stock_price=snapshot.stock_price, equity_vol=vol, debt_per_share=dps)

    return SpreadDerivation(fin_debt, dps, vol, structural.e2c_spread(inputs, params),
                            structural.creditgrades_spread(inputs, params))


def _check_spread(name, value):

    if value is not None and (not math.isfinite(value) or value < 0):

        raise DomainError("%s must be a spread >= 0, got %s" % (name, value))


@dataclass(frozen=True)
class RawRecord:
    """
    The variables of the forest for one firm on one date: the label (5y CDS) and the independent variables
    (E2C, IG CDX, market cap, ratings, sector, country). The CreditGrades spread rides along for the reports.
    """

    firm_id: str
    date: datetime.date
    e2c_bps: float = None
    cds5y_bps: float = None
    ig_cdx_bps: float = None
    market_cap: float = None
    sp_rating: str = None
    moody_rating: str = None
    sector: str = None
    country: str = None
    creditgrades_bps: float = None

    def __post_init__(self):

        for name in ('e2c_bps', 'cds5y_bps', 'ig_cdx_bps', 'creditgrades_bps'):

            _check_spread(name, getattr(self, name))

    @property
    def rating(self):
        """Merged notch of the two agencies (None when not rated)"""

        return merge_ratings(self.sp_rating, self.moody_rating)

    @property
    def rating_bucket(self):

        return None if self.rating is None else rating_bucket(self.rating)


REQUIRED_FIELDS = ('e2c_bps', 'cds5y_bps', 'ig_cdx_bps', 'market_cap', 'rating', 'sector', 'country')


def build_records(snapshots, params):
    """
    Turn snapshots into records, deriving the spreads from the fundamentals. A snapshot whose fundamentals cannot
    produce a spread keeps None spreads (drop_incomplete removes it later).

    :param snapshots: list of FirmSnapshot
    :param params: a structural.ModelParams
    :return: list of RawRecord, same order
    """

    records = []

    n_failed = 0

    for snapshot in snapshots:

        try:

            derived = derive_spreads(snapshot, params)

        except DomainError as e:

            log.debug("Line %s: no spread (%s)" % (snapshot.line, e))

            n_failed += 1

            e2c, creditgrades = None, None

        else:

            e2c, creditgrades = derived.e2c_bps, derived.creditgrades_bps

        records.append(RawRecord(firm_id=snapshot.firm_id, date=snapshot.date, e2c_bps=e2c,
                                 cds5y_bps=snapshot.cds_5y_bps, ig_cdx_bps=snapshot.ig_cdx_bps,
                                 market_cap=snapshot.market_cap, sp_rating=snapshot.sp_rating,
                                 moody_rating=snapshot.moody_rating, sector=snapshot.sector,
                                 country=snapshot.country, creditgrades_bps=creditgrades))

    if n_failed > 0:

        log.info("%s of %s snapshots have no spread approximation" % (n_failed, len(snapshots)))

    return records


def load_records(filename, params):
    """read_snapshots followed by build_records"""

    return build_records(read_snapshots(filename), params)


def drop_incomplete(records):
    """
    Keep only the records where every variable of the forest is present (the data is never imputed)

    :param records: list of RawRecord
    :return: the complete records, in the input order
    """

    kept = [r for r in records if all(getattr(r, name) is not None for name in REQUIRED_FIELDS)]

    if len(kept) < len(records):

        log.info("Removed %s records with missing data, %s left" % (len(records) - len(kept), len(kept)))

    return kept


def drop_sector(records, sector):
    """Records of every sector but the given one"""

    return [r for r in records if r.sector != sector]


@dataclass(frozen=True)
class Column:

    name: str
    kind: str

    @property
    def group(self):
        """Name of the one-hot group of a dummy column (None for other kinds)"""

        return self.name.split('=', 1)[0] if self.kind == DUMMY else None

    @property
    def category(self):

        return self.name.split('=', 1)[1] if self.kind == DUMMY else None


def _dummy_name(group, category):

    return "%s=%s" % (group, category)


@dataclass(frozen=True)
class FeatureLayout:
    """
    Fitted encoding of the records: the numeric and ordinal columns followed by one-hot groups.

    :param groups: tuple of (group name, kept categories) pairs; the category of a group with the fewest observations
    is not kept, so its rows are all-zero in that group
    :param dropped: tuple of (group name, dropped category) pairs
    """

    groups: tuple
    dropped: tuple = ()

    @property
    def columns(self):

        columns = [Column(name, NUMERIC) for name in NUMERIC_FEATURES]
        columns.extend(Column(name, ORDINAL) for name in ORDINAL_FEATURES)

        for group, categories in self.groups:

            columns.extend(Column(_dummy_name(group, c), DUMMY) for c in categories)

        return tuple(columns)

    @classmethod
    def fit(cls, records):
        """
        Learn the kept categories of every one-hot group. Ties on the fewest observations drop the lexicographically
        smallest category.

        :param records: complete records
        :return: a FeatureLayout
        """

        groups = []
        dropped = []

        for group in CATEGORICAL_GROUPS:

            counts = Counter(getattr(r, group) for r in records)

            if len(counts) == 0:

                groups.append((group, ()))

                continue

            smallest = min(counts, key=lambda category: (counts[category], category))

            log.debug("Dropping the dummy %s" % _dummy_name(group, smallest))

            groups.append((group, tuple(sorted(c for c in counts if c != smallest))))
            dropped.append((group, smallest))

        return cls(groups=tuple(groups), dropped=tuple(dropped))

    @classmethod
    def from_columns(cls, columns, dropped=()):
        """
        Rebuild a layout from stored column metadata (e.g. read back from a forest file)

        :param columns: sequence of Column
        :param dropped: (group, dropped category) pairs
        :return: a FeatureLayout
        :raise CompatibilityError: if the columns do not follow the layout of this package
        """

        columns = tuple(columns)

        base = [Column(name, NUMERIC) for name in NUMERIC_FEATURES] + [Column(n, ORDINAL) for n in ORDINAL_FEATURES]

        if list(columns[:len(base)]) != base:

            raise CompatibilityError("Feature columns %s do not start with %s"
                                     % ([c.name for c in columns[:len(base)]], [c.name for c in base]))

        groups = dict((group, []) for group in CATEGORICAL_GROUPS)

        for column in columns[len(base):]:

            if column.kind != DUMMY or column.group not in groups:

                raise CompatibilityError("Unexpected feature column %s (%s)" % (column.name, column.kind))

            groups[column.group].append(column.category)

        layout = cls(groups=tuple((group, tuple(groups[group])) for group in CATEGORICAL_GROUPS),
                     dropped=tuple(dropped))

        if layout.columns != columns:

            raise CompatibilityError("Feature columns are not in the canonical order")

        return layout

    def transform(self, records):
        """
        Encode records into a FeatureMatrix. A category never seen when fitting yields an all-zero group, with a
        warning.

        :param records: complete records
        :return: a FeatureMatrix
        """

        columns = self.columns

        n = len(records)

        x = np.zeros((n, len(columns)), dtype=float)

        x[:, 0] = [r.e2c_bps for r in records]
        x[:, 1] = [r.ig_cdx_bps for r in records]
        x[:, 2] = [r.market_cap for r in records]
        x[:, 3] = [r.rating for r in records]

        position = {c.name: j for j, c in enumerate(columns)}

        dropped = dict(self.dropped)

        unseen = Counter()

        for i, record in enumerate(records):

            for group in CATEGORICAL_GROUPS:

                category = getattr(record, group)

                j = position.get(_dummy_name(group, category))

                if j is not None:

                    x[i, j] = 1.0

                elif category != dropped.get(group):

                    unseen[(group, category)] += 1

        for (group, category), count in sorted(unseen.items()):

            log.warning("Category %s of %s was not seen when fitting the features: %s rows get an all-zero group"
                        % (category, group, count))

        return FeatureMatrix(firm_ids=np.array([r.firm_id for r in records], dtype=str),
                             dates=np.array([r.date.isoformat() for r in records], dtype=str),
                             y=np.array([r.cds5y_bps for r in records], dtype=float),
                             x=x,
                             columns=columns,
                             records=tuple(records),
                             layout=self)


def encode_features(records):
    """
    Label-encode the ratings, one-hot encode countries and sectors (dropping the category with the fewest
    observations in each group) and pass the numeric variables through unscaled.

    :param records: complete records (see drop_incomplete)
    :return: a FeatureMatrix
    """

    layout = FeatureLayout.fit(records)

    return layout.transform(records)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """
    Encoded design matrix. Arrays are read-only.

    :param firm_ids: firm of each row
    :param dates: ISO date of each row
    :param y: label (observed 5y CDS, bps)
    :param x: features, one column per entry of columns
    :param columns: tuple of Column
    :param records: the RawRecord behind each row (empty for matrices built from arrays)
    :param layout: the FeatureLayout that encoded the records (None for matrices built from arrays)
    """

    firm_ids: np.ndarray
    dates: np.ndarray
    y: np.ndarray
    x: np.ndarray
    columns: tuple
    records: tuple = ()
    layout: object = None

    def __post_init__(self):

        if self.x.ndim != 2 or self.x.shape[0] != self.y.shape[0] or self.x.shape[1] != len(self.columns):

            raise DomainError("Inconsistent feature matrix: x %s, y %s, %s columns"
                              % (self.x.shape, self.y.shape, len(self.columns)))

        if not np.all(np.isfinite(self.x)) or not np.all(np.isfinite(self.y)):

            raise DomainError("Feature matrix contains missing or non-finite values")

        for array in (self.firm_ids, self.dates, self.y, self.x):

            array.flags.writeable = False

    @classmethod
    def from_arrays(cls, x, y, names=None, firm_ids=None, dates=None):
        """Matrix of numeric columns built directly from arrays (synthetic data, tests)"""

        x = np.array(x, dtype=float, ndmin=2)
        y = np.array(y, dtype=float)

        n, p = x.shape

        names = names if names is not None else ["x%s" % j for j in range(p)]

        firm_ids = np.array(firm_ids if firm_ids is not None else ["firm%s" % i for i in range(n)], dtype=str)
        dates = np.array(dates if dates is not None else ["1970-01-01"] * n, dtype=str)

        return cls(firm_ids=firm_ids, dates=dates, y=y, x=x, columns=tuple(Column(name, NUMERIC) for name in names))

    @property
    def n_rows(self):

        return self.y.shape[0]

    @property
    def n_features(self):

        return len(self.columns)

    @property
    def names(self):

        return [c.name for c in self.columns]

    def take(self, rows):
        """Sub-matrix made of the given row indices (or boolean mask)"""

        rows = np.arange(self.n_rows)[rows]

        records = tuple(self.records[i] for i in rows) if len(self.records) > 0 else ()

        return FeatureMatrix(firm_ids=self.firm_ids[rows], dates=self.dates[rows], y=self.y[rows], x=self.x[rows],
                             columns=self.columns, records=records, layout=self.layout)


@dataclass(frozen=True, eq=False)
class SampleSplit:
    """Result of split_in_out"""

    in_sample: FeatureMatrix
    out_of_sample: FeatureMatrix
    removed_firms: tuple
    removed_dates: tuple

    @property
    def out_fraction(self):
        """Realized share of the rows that ended up out of sample"""

        total = self.in_sample.n_rows + self.out_of_sample.n_rows

        return self.out_of_sample.n_rows / total if total > 0 else 0.0


def _round_half_up(value):

    return int(math.floor(value + 0.5))


def _check_fraction(name, value):

    if not (0.0 <= value < 1.0):

        raise DomainError("%s must be in [0, 1), got %s" % (name, value))


def split_in_out(matrix, firm_frac, date_frac, seed):
    """
    Randomly remove a fraction of the firms and of the dates: the in-sample set is made of the rows whose firm and
    date are both kept, every other row is out of sample.

    :param matrix: a FeatureMatrix
    :param firm_frac: fraction of the firms to remove, in [0, 1)
    :param date_frac: fraction of the dates to remove, in [0, 1)
    :param seed: seed of the selection
    :return: a SampleSplit
    """

    _check_fraction("Firm fraction", firm_frac)
    _check_fraction("Date fraction", date_frac)

    rng = np.random.default_rng(seed)

    firms = np.unique(matrix.firm_ids)
    dates = np.unique(matrix.dates)

    removed_firms = np.sort(rng.choice(firms, size=_round_half_up(firm_frac * len(firms)), replace=False))
    removed_dates = np.sort(rng.choice(dates, size=_round_half_up(date_frac * len(dates)), replace=False))

    out = np.isin(matrix.firm_ids, removed_firms) | np.isin(matrix.dates, removed_dates)

    split = SampleSplit(in_sample=matrix.take(~out), out_of_sample=matrix.take(out),
                        removed_firms=tuple(removed_firms.tolist()), removed_dates=tuple(removed_dates.tolist()))

    log.info("Split: %s firms and %s dates removed, %s rows in sample, %s out of sample (%.1f%%)"
             % (len(removed_firms), len(removed_dates), split.in_sample.n_rows, split.out_of_sample.n_rows,
                100 * split.out_fraction))

    return split


def prepare_matrix(records, layout=None):
    """
    drop_incomplete + encoding, with the pipeline precondition that something is left

    :param records: list of RawRecord
    :param layout: an already fitted FeatureLayout, or None to fit one on these records
    :return: a FeatureMatrix
    """

    records = drop_incomplete(records)

    if len(records) == 0:

        raise PipelineError("No complete record left after removing missing data")

    return encode_features(records) if layout is None else layout.transform(records)
