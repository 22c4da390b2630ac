"""Exception hierarchy.

``ConfigError`` signals invalid input (CLI exit code 2); every other
``LdpError`` is an estimator or model failure (exit code 3).
"""


class LdpError(Exception):
    pass


class ConfigError(LdpError, ValueError):
    pass


class UnstableModel(LdpError):
    pass


class DegenerateModel(LdpError):
    pass


class NoAlphaRoot(LdpError):
    pass


class UntiltableFamily(LdpError):
    pass


class NoMinorization(LdpError):
    pass


class InvalidMode(LdpError):
    pass


class RejectionStall(LdpError):
    pass


class NoCompleteCycle(LdpError):
    pass


class EscapeAmbiguous(LdpError):
    pass


class BudgetTooSmall(LdpError):
    pass


class ResolutionOverflow(LdpError):
    pass


class UnsupportedEvent(LdpError):
    pass


class NotSeparated(LdpError):
    pass


class GammaTooLarge(LdpError):
    pass
