"""Exception hierarchy shared by the library and the command line."""


class RevealBanditError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(RevealBanditError, ValueError):
    """Invalid graph, policy or experiment parameters."""


class ParseError(RevealBanditError, ValueError):
    """Malformed input file. Carries the offending line number when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class UsageError(RevealBanditError, ValueError):
    """An operation was called outside its contract (bad index, wrong mode)."""


class HarnessError(RevealBanditError, RuntimeError):
    """Internal inconsistency between a policy and the episode driver."""
