"""Closed-form CDS spread approximations: the Equity-to-Credit (E2C) formula and the CreditGrades model.

Both spreads are returned in basis points (decimal rate x 1e4)."""

import logging
import math
import warnings
from dataclasses import dataclass

from scipy.special import erfc

from E2C.exceptions import DomainError, NumericalWarning

log = logging.getLogger(__name__)

BPS = 1e4

# Spread reported when the CreditGrades survival probability underflows to zero
MAX_SPREAD_BPS = 1e6

# Largest out-of-range excursion of a probability that is clamped silently
CLAMP_TOLERANCE = 1e-9


def _check_finite(name, value, allow_zero=True):

    if not math.isfinite(value):

        raise DomainError("%s must be finite, got %s" % (name, value))

    if value < 0 or (value == 0 and not allow_zero):

        raise DomainError("%s must be %s 0, got %s" % (name, ">=" if allow_zero else ">", value))


@dataclass(frozen=True)
class ModelParams:
    """
    Calibration of the structural models.

    :param recovery: recovery rate R of the CDS, in [0, 1]
    :param global_recovery: average recovery L on the debt defining the default barrier, in (0, 1]
    :param lambda_: standard deviation of the global recovery (CreditGrades only), >= 0
    :param maturity: horizon T in years, > 0
    """

    recovery: float = 0.3
    global_recovery: float = 0.5
    lambda_: float = 0.3
    maturity: float = 5.0

    def __post_init__(self):

        if not (0.0 <= self.recovery <= 1.0):

            raise DomainError("Recovery rate must be in [0, 1], got %s" % self.recovery)

        if not (0.0 < self.global_recovery <= 1.0):

            raise DomainError("Global recovery must be in (0, 1], got %s" % self.global_recovery)

        _check_finite("lambda", self.lambda_)

        _check_finite("Maturity", self.maturity, allow_zero=False)


@dataclass(frozen=True)
class SpreadInputs:
    """
    Market inputs of both formulas.

    :param stock_price: current stock price S0 (> 0, a zero price is a default, not an input)
    :param equity_vol: annualized equity volatility (>= 0)
    :param debt_per_share: debt-per-share D in the stock price currency (>= 0)
    """

    stock_price: float
    equity_vol: float
    debt_per_share: float

    def __post_init__(self):

        _check_finite("Stock price", self.stock_price, allow_zero=False)
        _check_finite("Equity volatility", self.equity_vol)
        _check_finite("Debt-per-share", self.debt_per_share)


def mad_ratio(inputs, global_recovery):
    """
    Market-Adjusted Debt ratio L.D / (S0 + L.D)

    :param inputs: a SpreadInputs instance
    :param global_recovery: the average recovery L on the debt
    :return: the ratio, in [0, 1)
    """

    _check_finite("Global recovery", global_recovery, allow_zero=False)

    adjusted_debt = global_recovery * inputs.debt_per_share

    return adjusted_debt / (inputs.stock_price + adjusted_debt)


def e2c_spread(inputs, params):
    """
    The E2C approximation (1 - R) * 4/9 * MAD * sigma^2, in basis points.

    The hazard rate is null when the debt is null, so the spread is exactly 0 in that case.

    :param inputs: a SpreadInputs instance
    :param params: a ModelParams instance
    :return: the spread in bps
    """

    ratio = mad_ratio(inputs, params.global_recovery)

    return (1.0 - params.recovery) * 4.0 / 9.0 * ratio * inputs.equity_vol ** 2 * BPS


def normal_cdf(x):
    """Standard normal CDF through the complementary error function (absolute error well below 1e-12)"""

    return 0.5 * erfc(-x / math.sqrt(2.0))


def creditgrades_survival(inputs, params, t):
    """
    CreditGrades survival probability up to time t.

    Conventions: a null debt gives a survival of 1 (the barrier is at zero). When A_t vanishes
    (no equity volatility and no barrier uncertainty) the barrier can never be reached since d > 1,
    so the survival is 1 as well.

    :param inputs: a SpreadInputs instance
    :param params: a ModelParams instance (global_recovery and lambda_ are used)
    :param t: horizon in years, > 0
    :return: the survival probability, clamped into [0, 1]
    """

    _check_finite("Horizon", t, allow_zero=False)

    if inputs.debt_per_share == 0:

        return 1.0

    s0 = inputs.stock_price
    adjusted_debt = params.global_recovery * inputs.debt_per_share

    d = (s0 + adjusted_debt) / adjusted_debt * math.exp(params.lambda_ ** 2)

    a_squared = (inputs.equity_vol * s0 / (s0 + adjusted_debt)) ** 2 * t + params.lambda_ ** 2

    if a_squared == 0:

        return 1.0

    a_t = math.sqrt(a_squared)
    log_d = math.log(d)

    survival = normal_cdf(-a_t / 2.0 + log_d / a_t) - d * normal_cdf(-a_t / 2.0 - log_d / a_t)

    if survival < -CLAMP_TOLERANCE or survival > 1.0 + CLAMP_TOLERANCE:

        warnings.warn("Survival probability %s is out of [0, 1] beyond tolerance, clamping it" % survival,
                      NumericalWarning)

    return min(max(survival, 0.0), 1.0)


def creditgrades_spread(inputs, params):
    """
    CreditGrades spread (1 - R) * h_CG in basis points, where h_CG = -log(survival(T)) / T.

    A null survival (infinite hazard) is reported as MAX_SPREAD_BPS.

    :param inputs: a SpreadInputs instance
    :param params: a ModelParams instance
    :return: the spread in bps
    """

    survival = creditgrades_survival(inputs, params, params.maturity)

    if survival >= 1.0:

        return 0.0

    if survival <= 0.0:

        log.debug("Null survival for %s, saturating the CreditGrades spread" % (inputs,))

        return MAX_SPREAD_BPS

    hazard = -math.log(survival) / params.maturity

    return min((1.0 - params.recovery) * hazard * BPS, MAX_SPREAD_BPS)
