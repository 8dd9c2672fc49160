"""Exception types raised across the package."""


class ContractError(ValueError):
    """Arguments violate an operation's preconditions (shapes, signs, ranges)."""


class ConfigurationError(ValueError):
    """A scenario or config file is inconsistent or incomplete."""


class NotExponentiallyStable(RuntimeError):
    """The sampled semigroup norms do not decay over the fit horizon."""


class NotGloballyLipschitz(ValueError):
    """A delay term carries no global Lipschitz constant."""


class HistoryUnderrun(LookupError):
    """A history query fell outside the stored time span."""


class RootFindingError(RuntimeError):
    """The Robin secular equation could not be bracketed."""


class FitError(ValueError):
    """A decay fit window contains zero, negative or non-finite norms."""
