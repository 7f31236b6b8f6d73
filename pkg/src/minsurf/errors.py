"""Exception hierarchy shared by all minsurf modules."""


class MinsurfError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(MinsurfError, ValueError):
    pass


class ConfigError(MinsurfError, ValueError):
    pass


class NotTimelikeError(MinsurfError):
    """The graph radicand 1 - phi_t^2 + phi_x^2 is not positive somewhere."""

    def __init__(self, message, index=None, value=None):
        super().__init__(message)
        self.index = index
        self.value = value


class SolverError(MinsurfError):
    pass


class BlowUpError(SolverError):
    def __init__(self, message, level=None, index=None):
        super().__init__(message)
        self.level = level
        self.index = index


class PicardError(SolverError):
    def __init__(self, message, level=None, index=None, residual=None):
        super().__init__(message)
        self.level = level
        self.index = index
        self.residual = residual


class ReconstructionError(MinsurfError):
    pass


class InvalidSeedError(ReconstructionError):
    pass


class OutOfDomainError(ReconstructionError, ValueError):
    pass
