import logging

from lsoftmax.helpers import HANDLER_NAME, logger_quick_setup


def test_quick_setup_replaces_its_handler():
    logger = logging.getLogger("lsoftmax")
    logger_quick_setup(logging.DEBUG)
    logger_quick_setup(logging.INFO)
    installed = [h for h in logger.handlers if h.get_name() == HANDLER_NAME]
    assert len(installed) == 1
    assert logger.level == logging.INFO
    assert not [h for h in logging.getLogger("urllib3").handlers if h.get_name() == HANDLER_NAME]
