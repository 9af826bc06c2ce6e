"""Exception hierarchy shared by the library and the CLI exit codes."""


class AtlasLabError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InputError(AtlasLabError):
    """Invalid data: bad shapes, non-finite values, malformed files."""

    exit_code = 2


class DegeneracyError(AtlasLabError):
    """Numerically degenerate problem (e.g. vanishing spectral gap)."""

    exit_code = 3


class ConfigError(AtlasLabError):
    """Invalid run configuration (unknown keys, out-of-range values)."""

    exit_code = 4
