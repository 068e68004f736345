"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested quantity."""


class SpecError(ValueError):
    """A distribution or Levy spec string could not be parsed."""

    def __init__(self, message, token=None):
        super().__init__(message)
        self.token = token


class PremiseError(ValueError):
    """A coupling construction was asked to run on a violated premise."""

    def __init__(self, premise, message):
        super().__init__(f"{premise}: {message}")
        self.premise = premise
