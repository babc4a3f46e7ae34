"""Run configuration: model calibration, forest hyperparameters, split settings and seeds.

The configuration file is a flat text file of 'key = value' lines; '#' starts a comment."""

import logging
from dataclasses import dataclass, fields, replace

from E2C.exceptions import DataFormatError
from E2C.structural import ModelParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:

    recovery: float = 0.3
    global_recovery: float = 0.5
    lambda_: float = 0.3
    maturity: float = 5.0

    n_trees: int = 50
    n_features: int = 15
    max_depth: int = 15

    firm_fraction: float = 0.2
    date_fraction: float = 0.2
    trim_fraction: float = 0.1

    seed: int = 0
    workers: int = 1

    out_dir: str = '.'

    def model_params(self):

        return ModelParams(recovery=self.recovery, global_recovery=self.global_recovery, lambda_=self.lambda_,
                           maturity=self.maturity)

    def provenance(self):
        """(key, value) pairs echoed in the header of every output"""

        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def updated(self, **overrides):
        """Copy of this configuration where the overrides that are not None replace the current values"""

        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


_TYPES = {f.name: f.type for f in fields(RunConfig)}

_CASTS = {'float': float, 'int': int, 'str': str, float: float, int: int, str: str}


def _cast(key, text, line_number):

    cast = _CASTS[_TYPES[key]]

    try:

        return cast(text)

    except ValueError:

        raise DataFormatError("Line %s: cannot read '%s' as a value for %s" % (line_number, text, key))


def parse_config(text, base=None):
    """
    Parse the content of a configuration file

    :param text: the 'key = value' lines
    :param base: configuration providing the values of the keys not in the text (defaults if None)
    :return: a RunConfig
    """

    values = {}

    for line_number, line in enumerate(text.splitlines(), start=1):

        line = line.split('#', 1)[0].strip()

        if not line:

            continue

        if '=' not in line:

            raise DataFormatError("Line %s of configuration: expected 'key = value', got '%s'" % (line_number, line))

        key, value = [token.strip() for token in line.split('=', 1)]

        if key not in _TYPES:

            raise DataFormatError("Line %s of configuration: unknown key '%s'" % (line_number, key))

        values[key] = _cast(key, value, line_number)

    base = base if base is not None else RunConfig()

    return replace(base, **values)


def load_config(filename):

    log.info("Reading configuration from %s" % filename)

    with open(filename) as f:

        return parse_config(f.read())


def save_config(config, filename):

    with open(filename, 'w+') as f:

        for key, value in config.provenance():

            f.write("%s = %r\n" % (key, value) if isinstance(value, float) else "%s = %s\n" % (key, value))
