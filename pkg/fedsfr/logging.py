# SPDX-License-Identifier: Apache-2.0

"""Logging module"""

import logging

stream_handler = logging.StreamHandler()
formatter = logging.Formatter("%(message)s")
stream_handler.setFormatter(formatter)
stream_handler.setLevel(logging.INFO)

logger = logging.getLogger("main")
logger.setLevel(logging.DEBUG)
logger.addHandler(stream_handler)


def set_verbosity(verbose: bool) -> None:
    """Switches the console handler between INFO and DEBUG

    Args:
        verbose (bool): Emit DEBUG records when True
    """
    stream_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
