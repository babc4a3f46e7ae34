import logging
import os

import pytest

from E2C.output_directory import output_directory


def test_creates_the_directory_and_joins_names(tmp_path):

    directory = str(tmp_path / 'a' / 'b')

    with output_directory(directory) as path:

        filename = path('out.csv')

    assert os.path.isdir(directory)
    assert filename == os.path.join(directory, 'out.csv')


def test_failure_warns_about_partial_outputs(tmp_path, caplog):

    with caplog.at_level(logging.WARNING):

        with pytest.raises(RuntimeError):

            with output_directory(str(tmp_path)) as path:

                with open(path('partial.csv'), 'w+') as f:

                    f.write('x\n')

                raise RuntimeError("interrupted")

    assert "partial outputs" in caplog.text
    assert os.path.exists(str(tmp_path / 'partial.csv'))
