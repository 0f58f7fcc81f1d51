# SPDX-License-Identifier: Apache-2.0

"""Exceptions raised by the simulator"""


class FedSFRError(Exception):
    """Base class for all simulator errors."""


class ShapeMismatchError(FedSFRError, ValueError):
    pass


class NonFiniteError(FedSFRError, ValueError):
    pass


class DegenerateInputError(FedSFRError, ValueError):
    """Zero-norm features, empty datasets and similar inputs with no meaningful result."""


class BudgetError(FedSFRError, ValueError):
    """Sparsification budgets, client counts or partition sizes that cannot be honoured."""


class FormatError(FedSFRError, ValueError):
    """Malformed IDX, NetPBM, checkpoint or wire payloads."""


class TapeMismatchError(FedSFRError, ValueError):
    pass
