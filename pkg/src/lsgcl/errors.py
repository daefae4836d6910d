"""Exception types raised across the package."""


class GraphFormatError(ValueError):
    """A dataset or cache file does not follow its text format."""


class NumericError(ArithmeticError):
    """A non-finite value appeared during optimization."""


class SamplingError(RuntimeError):
    """Random sampling could not find enough valid items."""
