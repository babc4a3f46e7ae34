import contextlib
import logging
import os

log = logging.getLogger(__name__)


@contextlib.contextmanager
def output_directory(directory):
    """
    Make sure the output directory exists and yield a function joining file names to it. Files written by a
    failing command stay where they are, with a warning.

    :param directory: path of the directory (created with its parents if needed)
    """

    os.makedirs(directory, exist_ok=True)

    written = []

    def path(filename):

        full = os.path.join(directory, filename)

        written.append(full)

        return full

    try:

        yield path

    except:

        if len(written) > 0:

            log.warning("Command failed, partial outputs may remain in %s" % directory)

        raise

    finally:

        log.debug("Output files: %s" % ", ".join(written))
