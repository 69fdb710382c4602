"""Exception hierarchy shared by the library and the CLI.

Exit codes reported by the CLI: 0 ok, 2 usage error, 3 alignment/data
error, 4 bridge error, 5 I/O error.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_BRIDGE = 4
EXIT_IO = 5


class MbrforgeError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class UsageError(MbrforgeError):
    """Flag combinations the CLI cannot act on."""

    exit_code = EXIT_USAGE


class DataError(MbrforgeError):
    """Invalid or inconsistent input data (bad shapes, bad values)."""

    exit_code = EXIT_DATA


class AlignmentError(DataError):
    """Parallel inputs disagree on segment counts."""


class InfiniteDivergenceError(DataError):
    """KL divergence is infinite because of a one-sided zero probability."""


class BridgeError(MbrforgeError):
    """Failure talking to an external scorer process."""

    exit_code = EXIT_BRIDGE


class ProtocolError(BridgeError):
    """The scorer replied with something that is not a number per line."""


class BridgeCrashError(BridgeError):
    """The scorer process exited before answering a batch."""


class BridgeTimeoutError(BridgeError):
    """The scorer did not answer within the configured timeout."""
