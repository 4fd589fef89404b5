"""Exception types shared across the package."""


class MieSurrogateError(Exception):
    """Base class for all package-specific errors."""


class GridError(MieSurrogateError, ValueError):
    """Wavenumber grid violates an invariant (ordering, uniformity, length)."""


class RangeError(MieSurrogateError, ValueError):
    """Requested range falls outside the available data range."""


class DegenerateInput(MieSurrogateError, ValueError):
    """Input is degenerate for the operation (e.g. zero norm, constant series)."""


class DimensionError(MieSurrogateError, ValueError):
    """Array or grid dimensions do not match."""


class DomainError(MieSurrogateError, ValueError):
    """Parameter outside the supported physical parameter box."""


class RankError(MieSurrogateError, ValueError):
    """Matrix rank too low for the requested number of components."""


class SingularDesign(MieSurrogateError, ValueError):
    """Least-squares design matrix is numerically rank deficient."""


class FormatError(MieSurrogateError, ValueError):
    """Binary or structured file violates its format contract."""


class ParseError(MieSurrogateError, ValueError):
    """Text input (CSV, config) could not be parsed."""


class ConfigError(MieSurrogateError, ValueError):
    """Invalid configuration value or combination."""


class PeakOnBoundary(MieSurrogateError, ValueError):
    """Band maximum sits on the analysis window edge; position is unreliable."""


class BenchError(MieSurrogateError, RuntimeError):
    """Benchmark run aborted (corrector failure or mismatched reports)."""
