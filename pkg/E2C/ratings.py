"""Senior unsecured debt ratings on a shared S&P / Moody's comparison scale.

Notches are integers where a worse grade is a lower number: 16 is AAA/Aaa, 1 is B-/B3 and 0 gathers CCC/Caa and
everything below."""

import numbers

from E2C.exceptions import DataFormatError

SP_SCALE = ('AAA', 'AA+', 'AA', 'AA-', 'A+', 'A', 'A-', 'BBB+', 'BBB', 'BBB-', 'BB+', 'BB', 'BB-', 'B+', 'B', 'B-')

MOODYS_SCALE = ('Aaa', 'Aa1', 'Aa2', 'Aa3', 'A1', 'A2', 'A3', 'Baa1', 'Baa2', 'Baa3', 'Ba1', 'Ba2', 'Ba3',
                'B1', 'B2', 'B3')

BELOW_B = ('CCC+', 'CCC', 'CCC-', 'CC', 'C', 'D', 'SD', 'Caa1', 'Caa2', 'Caa3', 'Ca')

NOT_RATED = ('', 'NR', 'WR', 'N.A.', 'NA')

TOP_NOTCH = len(SP_SCALE)

_NOTCHES = {}

for _scale in (SP_SCALE, MOODYS_SCALE):

    for _i, _grade in enumerate(_scale):

        _NOTCHES[_grade] = TOP_NOTCH - _i

for _grade in BELOW_B:

    _NOTCHES[_grade] = 0

# (lowest notch, bucket name), best bucket first
BUCKETS = ((_NOTCHES['A-'], 'A'), (_NOTCHES['BBB-'], 'BBB'), (_NOTCHES['BB-'], 'BB'), (_NOTCHES['B-'], 'B'),
           (0, 'below B'))

BUCKET_NAMES = tuple(name for _, name in BUCKETS)


def rating_notch(grade):
    """
    Convert a S&P or Moody's grade to its notch on the shared scale

    :param grade: a grade symbol such as 'BBB-' or 'Baa3' (None, '' and 'NR' mean not rated)
    :return: an integer notch (0 to 16), or None if not rated
    """

    if grade is None:

        return None

    if isinstance(grade, numbers.Integral):

        if not 0 <= grade <= TOP_NOTCH:

            raise DataFormatError("Rating notch %s is outside [0, %s]" % (grade, TOP_NOTCH))

        return int(grade)

    symbol = str(grade).strip()

    if symbol.upper() in NOT_RATED:

        return None

    try:

        return _NOTCHES[symbol]

    except KeyError:

        raise DataFormatError("Unknown rating symbol '%s'" % grade)


def notch_name(notch):
    """S&P name of a notch (0 is reported as 'CCC')"""

    if notch == 0:

        return 'CCC'

    return SP_SCALE[TOP_NOTCH - notch]


def merge_ratings(sp, moody):
    """
    Combine the two agencies' grades: the common grade if they agree, the only one available if just one agency
    rates the firm, and the worst one if they disagree.

    :param sp: S&P grade (symbol or notch), or None
    :param moody: Moody's grade (symbol or notch), or None
    :return: the retained notch, or None when neither agency rates the firm
    """

    notches = [n for n in (rating_notch(sp), rating_notch(moody)) if n is not None]

    if len(notches) == 0:

        return None

    return min(notches)


def rating_bucket(notch):
    """Coarse bucket ('A', 'BBB', 'BB', 'B' or 'below B') used by the comparison tables"""

    for lowest, name in BUCKETS:

        if notch >= lowest:

            return name

    raise DataFormatError("Rating notch %s is outside the scale" % notch)
