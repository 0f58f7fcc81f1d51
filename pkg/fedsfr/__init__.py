# SPDX-License-Identifier: Apache-2.0

"""Federated learning with server-side feature reconstruction for JSCC image transmission"""

__version__ = "0.1.0"
