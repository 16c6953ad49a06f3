"""Error categories shared across the package.

Every category subclasses ValueError so callers that do not care about
the distinction can still catch one base type. The CLI maps each
category to its own exit status.
"""


class DimensionError(ValueError):
    """Tensor shapes disagree with an operation's contract."""


class ConfigurationError(ValueError):
    """A configuration is internally inconsistent (e.g. input too short
    for the architecture). The message reports the computed requirement."""


class FormatError(ValueError):
    """An on-disk artifact (dataset file, manifest, checkpoint) is
    malformed. The message names the offending file."""


class UsageError(ValueError):
    """Command-line arguments are invalid."""
