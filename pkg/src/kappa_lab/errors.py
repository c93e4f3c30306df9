"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the domain where the quantity is defined."""


class InconsistencyError(DomainError):
    """Supplied inputs are individually valid but jointly impossible."""


class ResolutionError(DomainError):
    """The requested quantile is finer than the sample can resolve (q*n < 1)."""


class NumericError(ArithmeticError):
    """A numerical procedure failed to converge or to bracket a root."""


class MonteCarloError(RuntimeError):
    """A single Monte Carlo run failed; the message names the run and its inputs."""
