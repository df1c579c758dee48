class SweepGuardError(Exception):
    """
    Base error for the toolchain. ``exit_code`` is what the CLI returns.
    """

    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class IRSyntaxError(SweepGuardError):
    exit_code = 3

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class IRValidationError(SweepGuardError):
    exit_code = 4


class UnknownFieldError(IRValidationError):
    pass


class ConfigurationError(SweepGuardError):
    exit_code = 5


class MetadataFormatError(ConfigurationError):
    pass


class MetadataMismatchError(ConfigurationError):
    pass


class RuntimeFaultError(SweepGuardError):
    exit_code = 6


class UnknownFrameError(RuntimeFaultError):
    pass
