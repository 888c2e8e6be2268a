from __future__ import annotations


class QClockError(ValueError):
    """Base class for all rejected inputs."""


class InvalidStateError(QClockError):
    pass


class SizeError(QClockError):
    pass


class UndefinedConditionalError(QClockError):
    """Raised when conditioning on an outcome that has probability zero."""


class ConfigError(QClockError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class BulletinConflictError(QClockError):
    pass


class InsufficientDataError(QClockError):
    pass
