"""Error taxonomy shared across the package.

ConfigError: an inconsistent or unresolvable configuration, detectable before
any numeric work. NonFiniteError: the simulation or its gradients left the
reals mid-run; carries enough context to locate the failure.
"""


class ConfigError(Exception):
    """Invalid or contradictory run configuration."""


class NonFiniteError(Exception):
    """A loss, statistic, or gradient became non-finite during a run."""

    def __init__(self, message: str, epoch: int | None = None, key: str | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.key = key
