import logging
import sys

HANDLER_NAME = "lsoftmax-console"


def logger_quick_setup(level=logging.INFO):
    """A helper function to quickly setup console logging for the package. Setting DEBUG
    logging will also apply these settings to ``urllib3`` (used by ``lsoftmax fetch``).

    Calling it again replaces the handler installed by the previous call.

    :param level: Logging Level
    """
    logger = logging.getLogger("lsoftmax")
    logger.setLevel(level)

    handler = logging.StreamHandler(sys.stdout)
    handler.set_name(HANDLER_NAME)
    handler.setLevel(level)
    formatter = logging.Formatter("%(asctime)s %(name)s %(levelname)s %(threadName)s %(message)s")
    handler.setFormatter(formatter)

    urllib3_logger = logging.getLogger("urllib3")
    for target in (logger, urllib3_logger):
        for previous in [h for h in target.handlers if h.get_name() == HANDLER_NAME]:
            target.removeHandler(previous)

    logger.addHandler(handler)

    if level == logging.DEBUG:
        urllib3_logger.setLevel(logging.DEBUG)
        urllib3_logger.addHandler(handler)
