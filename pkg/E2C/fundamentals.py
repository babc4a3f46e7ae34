"""Derive the E2C inputs from raw fundamentals: financial debt, debt-per-share and the volatility to use"""

import math
from dataclasses import dataclass, field

import numpy as np

from E2C.exceptions import DomainError

HISTORICAL_WINDOWS = (30, 60, 120, 200, 260, 360)  # days
IMPLIED_MATURITIES = (3, 6, 12, 18, 24)  # months

# Weights of the non-banking financial debt
OTHER_LIABILITIES_WEIGHT = 0.5
LEASES_WEIGHT = 0.4

# Caps (as fractions of the financial debt and of the market cap) and floor (fraction of S0)
MINORITY_INTEREST_CAP = 0.5
PREFERRED_EQUITY_CAP = 0.5
DEBT_PER_SHARE_FLOOR = 0.1


def _check_amount(name, value):

    if value is None or not math.isfinite(value) or value < 0:

        raise DomainError("%s must be a finite amount >= 0, got %s" % (name, value))


def _check_positive(name, value):

    if value is None or not math.isfinite(value) or value <= 0:

        raise DomainError("%s must be finite and > 0, got %s" % (name, value))


@dataclass(frozen=True)
class BalanceSheet:
    """Balance-sheet items in the report currency"""

    long_term_debt: float = 0.0
    short_term_debt: float = 0.0
    other_lt_liabilities: float = 0.0
    other_st_liabilities: float = 0.0
    lease_obligations: float = 0.0
    minority_interest: float = 0.0
    preferred_equity: float = 0.0
    is_banking: bool = False

    def __post_init__(self):

        for name in ('long_term_debt', 'short_term_debt', 'other_lt_liabilities', 'other_st_liabilities',
                     'lease_obligations', 'minority_interest', 'preferred_equity'):

            _check_amount(name, getattr(self, name))


@dataclass(frozen=True)
class MarketState:
    """
    Market data in the quote currency.

    :param fx_report_to_quote: multiply an amount in the report currency by this rate to get the quote currency
    """

    stock_price: float
    market_cap: float
    fx_report_to_quote: float = 1.0

    def __post_init__(self):

        _check_positive("Stock price", self.stock_price)
        _check_positive("Market cap", self.market_cap)
        _check_positive("FX rate", self.fx_report_to_quote)


@dataclass(frozen=True)
class VolatilityQuotes:
    """
    Annualized volatilities. Absent quotes are simply left out of the maps.

    :param historical: window in days -> historical volatility
    :param implied: maturity in months -> implied volatility of puts 0.5 std out of the money
    """

    historical: dict = field(default_factory=dict)
    implied: dict = field(default_factory=dict)

    def __post_init__(self):

        for key, value in list(self.historical.items()) + list(self.implied.items()):

            _check_amount("Volatility quote %s" % key, value)

    def values(self):

        return [self.historical[k] for k in sorted(self.historical)] + [self.implied[k] for k in sorted(self.implied)]


def financial_debt(balance_sheet):
    """
    Financial debt: the long term debt for banks, a weighted sum of liabilities otherwise.

    :param balance_sheet: a BalanceSheet instance
    :return: the financial debt in the report currency
    """

    if balance_sheet.is_banking:

        return balance_sheet.long_term_debt

    return (balance_sheet.long_term_debt + balance_sheet.short_term_debt
            + OTHER_LIABILITIES_WEIGHT * (balance_sheet.other_lt_liabilities + balance_sheet.other_st_liabilities)
            + LEASES_WEIGHT * balance_sheet.lease_obligations)


def debt_per_share(fin_debt, balance_sheet, market):
    """
    Debt-per-share D = (FinD - MinInt') / shares, floored at 10% of the stock price.

    Amounts are converted to the quote currency first, then the minority interest is capped at 50% of FinD and
    the preferred equity at 50% of the market cap. The share count is (MktCap + PrefEq') / S0.

    :param fin_debt: financial debt in the report currency (see financial_debt)
    :param balance_sheet: a BalanceSheet instance (minority interest and preferred equity are used)
    :param market: a MarketState instance
    :return: the debt-per-share in the quote currency
    """

    _check_amount("Financial debt", fin_debt)

    fx = market.fx_report_to_quote

    fin_debt = fin_debt * fx
    minority_interest = min(balance_sheet.minority_interest * fx, MINORITY_INTEREST_CAP * fin_debt)
    preferred_equity = min(balance_sheet.preferred_equity * fx, PREFERRED_EQUITY_CAP * market.market_cap)

    shares = (market.market_cap + preferred_equity) / market.stock_price

    raw = (fin_debt - minority_interest) / shares

    return max(raw, DEBT_PER_SHARE_FLOOR * market.stock_price)


def select_volatility(quotes):
    """
    Median of all the available historical and implied volatilities (mean of the two central values for an even
    count).

    :param quotes: a VolatilityQuotes instance
    :return: the volatility to use in the formulas
    """

    values = quotes.values()

    if len(values) == 0:

        raise DomainError("No volatility quote available")

    return float(np.median(values))
