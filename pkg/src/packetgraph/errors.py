"""Exception hierarchy and process exit codes."""

from __future__ import annotations


class PacketGraphError(Exception):
    """Base class for all errors raised by this package."""


class TimeAlgebraError(PacketGraphError):
    """Invalid basis or event-time operation (bad witness, mixed bases, ...)."""


class AmbiguousOrderingError(TimeAlgebraError):
    """Two distinct exact times whose witness values are closer than epsilon.

    Signals that the declared basis witnesses are too coarse to order the
    times that actually occur; callers must abort rather than guess.
    """


class GraphError(PacketGraphError):
    """Invalid metric-graph specification."""


class SimulationError(PacketGraphError):
    """Invalid simulation input or state."""


class ResourceLimitError(SimulationError):
    """A configured enumeration or event cap was exceeded."""


class QueryHorizonError(SimulationError):
    """Count query beyond the reliable part of the simulated horizon."""


class LatticeError(PacketGraphError):
    """Invalid lattice-counting input (bad weights, duplicate times, ...)."""


class RegimeError(PacketGraphError):
    """Closed-form predictor applied outside its commensurability regime."""


class ConfigError(PacketGraphError):
    """Malformed experiment configuration or input file."""


# CLI exit codes (documented in README).
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_AMBIGUOUS = 4
EXIT_TOLERANCE = 5


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code contract."""
    if isinstance(exc, AmbiguousOrderingError):
        return EXIT_AMBIGUOUS
    if isinstance(exc, ResourceLimitError):
        return EXIT_RESOURCE
    if isinstance(exc, (ConfigError, GraphError, TimeAlgebraError, RegimeError,
                        LatticeError, SimulationError)):
        return EXIT_CONFIG
    return EXIT_FAILURE
