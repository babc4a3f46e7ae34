"""Synthetic firm-snapshot panel with a known dependence of the CDS on the E2C spread.

The 5y CDS label is a deterministic signal (E2C, IG CDX, rating and size effects) plus Gaussian noise whose variance
is set so that the signal explains a chosen share (TARGET_R2 by default) of the label variance."""

import datetime
import logging
import math

import numpy as np
from astropy.table import MaskedColumn, Table

from E2C import fundamentals
from E2C.dataset import BALANCE_SHEET_COLUMNS, HISTORICAL_VOL_COLUMNS, IMPLIED_VOL_COLUMNS, SNAPSHOT_COLUMNS, \
    FirmSnapshot, derive_spreads
from E2C.exceptions import DomainError
from E2C.ratings import MOODYS_SCALE, SP_SCALE, TOP_NOTCH
from E2C.structural import ModelParams

log = logging.getLogger(__name__)

TARGET_R2 = 0.9

FIRST_DATE = datetime.date(2016, 2, 5)

# (name, relative weight); technology and diversified are the small sectors
SECTORS = (('Basic Materials', 10), ('Communications', 11), ('Consumer Cyclical', 14),
           ('Consumer Non-cyclical', 12), ('Energy', 8), ('Financial', 13), ('Industrial', 11), ('Utilities', 8),
           ('Technology', 3), ('Diversified', 1))

# (name, relative weight, report-to-quote fx rate)
COUNTRIES = (('United States', 139, 1.0), ('Eurozone', 78, 1.0), ('Japan', 22, 1.0), ('Great Britain', 22, 1.0),
             ('Australia', 14, 1.0), ('South Korea', 8, 1.0), ('Hong Kong', 6, 0.128), ('Canada', 5, 1.0),
             ('Malaysia', 1, 1.0))

# Effects of the non-E2C variables on the label
IG_CDX_LOADING = 0.6
RATING_EFFECT = 3.0  # bps per notch below A+
SIZE_EFFECT = 5.0  # bps per log unit of market cap
BASE_SPREAD = 20.0

MIN_LABEL = 1.0

# What a snapshot hit by missing_rate loses, by index
LOSABLE = ('ratings', 'ig_cdx_bps', 'cds_5y_bps')


def _weights(table):

    weights = np.array([row[1] for row in table], dtype=float)

    return weights / weights.sum()


def _grade(scale, notch):

    if notch == 0:

        return 'CCC' if scale is SP_SCALE else 'Caa1'

    return scale[TOP_NOTCH - notch]


def _ig_cdx_path(rng, n_dates):

    level = np.empty(n_dates)
    level[0] = 70.0

    for t in range(1, n_dates):

        level[t] = 70.0 + 0.95 * (level[t - 1] - 70.0) + rng.normal(0.0, 2.5)

    return np.maximum(level, 35.0)


def generate_panel(n_firms=300, n_dates=150, seed=0, missing_rate=0.0, bayes_r2=TARGET_R2, params=None):
    """
    Generate a firm-snapshot table

    :param n_firms: number of firms
    :param n_dates: number of weekly dates
    :param seed: seed of the generator
    :param missing_rate: probability that a snapshot loses one of its forest variables (its ratings, IG CDX or CDS)
    :param bayes_r2: share of the label variance explained by the signal, in (0, 1] (1 means no noise)
    :param params: structural.ModelParams used to compute the E2C signal (defaults if None)
    :return: an astropy Table with the SNAPSHOT_COLUMNS
    """

    if n_firms < 1 or n_dates < 1:

        raise DomainError("The panel needs at least one firm and one date")

    if not 0 <= missing_rate < 1:

        raise DomainError("Missing rate must be in [0, 1), got %s" % missing_rate)

    if not 0 < bayes_r2 <= 1:

        raise DomainError("Bayes R2 must be in (0, 1], got %s" % bayes_r2)

    params = params if params is not None else ModelParams()

    rng = np.random.default_rng(seed)

    dates = [FIRST_DATE + datetime.timedelta(weeks=t) for t in range(n_dates)]

    ig_cdx = _ig_cdx_path(rng, n_dates)

    columns = dict((name, []) for name in SNAPSHOT_COLUMNS)

    signal = []
    lost_labels = []

    for i in range(n_firms):

        sector = SECTORS[rng.choice(len(SECTORS), p=_weights(SECTORS))][0]
        country, _, fx = COUNTRIES[rng.choice(len(COUNTRIES), p=_weights(COUNTRIES))]

        is_banking = sector == 'Financial' and rng.random() < 0.6

        notch = int(np.clip(np.round(rng.normal(8.5, 2.5)), 0, TOP_NOTCH - 2))

        # Worse ratings go with more leverage and more volatility
        leverage = math.exp(rng.normal(math.log(0.4) + 0.15 * (11 - notch), 0.35))
        base_vol = max(0.12, 0.2 + 0.02 * (11 - notch) + rng.normal(0.0, 0.04))

        shares = 10 ** rng.uniform(7.5, 9.5)
        price = math.exp(rng.normal(math.log(40.0), 0.6))

        total_debt = leverage * price * shares / fx

        balance_sheet = dict(long_term_debt=0.55 * total_debt, short_term_debt=0.15 * total_debt,
                             other_lt_liabilities=0.12 * total_debt, other_st_liabilities=0.08 * total_debt,
                             lease_obligations=0.1 * total_debt, minority_interest=0.03 * total_debt,
                             preferred_equity=0.0 if rng.random() < 0.8 else 0.02 * total_debt)

        sp_notch = notch
        moody_notch = int(np.clip(notch + rng.choice([-1, 0, 0, 0, 1]), 0, TOP_NOTCH))

        agencies = rng.random()

        sp = _grade(SP_SCALE, sp_notch) if agencies > 0.1 else None
        moody = _grade(MOODYS_SCALE, moody_notch) if agencies < 0.9 else None

        merged = min(n for n in (sp_notch if sp else None, moody_notch if moody else None) if n is not None)

        vol_factor = 0.0

        for t in range(n_dates):

            vol_factor = 0.9 * vol_factor + rng.normal(0.0, 0.1)
            vol = base_vol * math.exp(vol_factor)

            price *= math.exp(rng.normal(-0.5 * vol ** 2 / 52, vol / math.sqrt(52)))

            historical = dict((w, vol * (1 + rng.normal(0.0, 0.05))) for w in fundamentals.HISTORICAL_WINDOWS
                              if rng.random() > 0.15)
            implied = dict((m, 1.1 * vol * (1 + rng.normal(0.0, 0.05))) for m in fundamentals.IMPLIED_MATURITIES
                           if rng.random() > 0.15)

            if len(historical) + len(implied) == 0:

                historical[fundamentals.HISTORICAL_WINDOWS[0]] = vol

            market_cap = price * shares

            snapshot = FirmSnapshot(firm_id="F%04d" % i, date=dates[t], stock_price=price, market_cap=market_cap,
                                    fx_rate=fx, is_banking=is_banking, balance_sheet=balance_sheet,
                                    historical_vols=historical, implied_vols=implied)

            e2c = derive_spreads(snapshot, params).e2c_bps

            signal.append(BASE_SPREAD + e2c + IG_CDX_LOADING * (ig_cdx[t] - 70.0)
                          + RATING_EFFECT * (TOP_NOTCH - 4 - merged) - SIZE_EFFECT * math.log(market_cap / 1e10))

            lost = rng.integers(len(LOSABLE)) if rng.random() < missing_rate else None

            columns['firm_id'].append(snapshot.firm_id)
            columns['date'].append(dates[t].isoformat())
            columns['stock_price'].append(price)
            columns['market_cap'].append(market_cap)
            columns['fx_rate'].append(fx)
            columns['is_banking'].append(int(is_banking))

            for name in BALANCE_SHEET_COLUMNS:

                columns[name].append(balance_sheet[name])

            for w, name in zip(fundamentals.HISTORICAL_WINDOWS, HISTORICAL_VOL_COLUMNS):

                columns[name].append(historical.get(w))

            for m, name in zip(fundamentals.IMPLIED_MATURITIES, IMPLIED_VOL_COLUMNS):

                columns[name].append(implied.get(m))

            columns['sp_rating'].append(None if lost == 0 else sp)
            columns['moody_rating'].append(None if lost == 0 else moody)
            columns['sector'].append(sector)
            columns['country'].append(country)
            columns['ig_cdx_bps'].append(None if lost == 1 else float(ig_cdx[t]))
            lost_labels.append(lost == 2)

    signal = np.array(signal)

    noise_std = math.sqrt(signal.var() * (1.0 - bayes_r2) / bayes_r2)

    labels = np.maximum(signal + rng.normal(0.0, noise_std, size=signal.shape[0]), MIN_LABEL)

    columns['cds_5y_bps'] = [None if lost else float(v) for v, lost in zip(labels, lost_labels)]

    log.info("Synthetic panel: %s firms x %s dates, noise std %.2f bps" % (n_firms, n_dates, noise_std))

    table = Table()

    for name in SNAPSHOT_COLUMNS:

        values = columns[name]

        mask = [v is None for v in values]

        if name in ('firm_id', 'date', 'sp_rating', 'moody_rating', 'sector', 'country'):

            data = ['' if v is None else v for v in values]

        else:

            data = [np.nan if v is None else v for v in values]

        table[name] = MaskedColumn(data=data, mask=mask) if any(mask) else data

    return table
