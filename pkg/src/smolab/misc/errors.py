"""Exceptions raised by the smolab library."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedMechanismError(NotImplementedError):
    """An exact code path is not available for the requested mechanism."""


class SolverError(RuntimeError):
    """A numerical solver or estimator could not produce a conclusive result."""


class StabilityError(RuntimeError):
    """The explicit PDE scheme left its admissible band."""


class WindowExhaustedError(RuntimeError):
    """The CPP window holds no branch alive at the requested horizon."""


class CapacityError(OverflowError):
    """Lineage counts exceed the platform integer range."""


class ConfigError(ValueError):
    """Malformed configuration file or invalid configuration value."""


class MissingArtifactError(FileNotFoundError):
    """An input artifact produced by another subcommand is missing."""

    def __init__(self, path: str, producer: str) -> None:
        self.path = path
        self.producer = producer
        super().__init__(
            f"Missing artifact {path}: run the `{producer}` subcommand first "
            + "with the same --out directory."
        )
