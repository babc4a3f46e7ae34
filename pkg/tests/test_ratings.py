import numpy as np
import pytest

from E2C.exceptions import DataFormatError
from E2C.ratings import BUCKET_NAMES, TOP_NOTCH, merge_ratings, notch_name, rating_bucket, rating_notch


def test_scales_agree():

    assert rating_notch('AAA') == rating_notch('Aaa') == TOP_NOTCH
    assert rating_notch('BBB-') == rating_notch('Baa3')
    assert rating_notch('B-') == rating_notch('B3') == 1
    assert rating_notch('CCC') == rating_notch('Caa2') == rating_notch('D') == 0


def test_worse_is_lower():

    grades = ['A', 'BBB', 'BB', 'B']

    notches = [rating_notch(g) for g in grades]

    assert notches == sorted(notches, reverse=True)
    assert len(set(notches)) == 4


@pytest.mark.parametrize("grade", [None, '', 'NR', 'WR', ' nr '])
def test_not_rated(grade):

    assert rating_notch(grade) is None


def test_unknown_symbol():

    with pytest.raises(DataFormatError):

        rating_notch('ZZZ')

    with pytest.raises(DataFormatError):

        rating_notch(17)


def test_integer_notches_pass_through():

    assert rating_notch(np.int64(5)) == 5
    assert notch_name(rating_notch('BB+')) == 'BB+'
    assert notch_name(0) == 'CCC'


def test_merge_ratings():

    assert merge_ratings('BBB', 'Baa2') == rating_notch('BBB')
    assert merge_ratings('A', None) == rating_notch('A')
    assert merge_ratings(None, 'A2') == rating_notch('A')
    assert merge_ratings('BBB', 'Ba2') == rating_notch('BB')
    assert merge_ratings(None, 'NR') is None


def test_buckets():

    assert rating_bucket(rating_notch('AAA')) == 'A'
    assert rating_bucket(rating_notch('A-')) == 'A'
    assert rating_bucket(rating_notch('BBB+')) == 'BBB'
    assert rating_bucket(rating_notch('BB-')) == 'BB'
    assert rating_bucket(rating_notch('B3')) == 'B'
    assert rating_bucket(rating_notch('CCC+')) == 'below B'

    assert BUCKET_NAMES == ('A', 'BBB', 'BB', 'B', 'below B')
