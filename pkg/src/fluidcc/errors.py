"""Exception types and source diagnostics shared across the compiler."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class Diagnostic:
    line: int
    col: int
    severity: str
    message: str

    def format(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.severity}: {self.message}"


class FluidccError(Exception):
    """Base class for all compiler errors."""


class DiagnosticError(FluidccError):
    """Raised when a source file produces one or more error diagnostics."""

    def __init__(self, diagnostics, filename: str = "<input>"):
        self.diagnostics = sorted(diagnostics)
        self.filename = filename
        super().__init__("\n".join(d.format(filename) for d in self.diagnostics))


class NetlistError(DiagnosticError):
    pass


class LibraryError(FluidccError):
    pass


class PlacementError(FluidccError):
    pass


class GridError(FluidccError):
    pass


class NoPathError(FluidccError):
    pass


class RoutingError(FluidccError):
    """A connection could not be realized. ``connection`` names the failing net."""

    def __init__(self, message: str, connection: str | None = None):
        self.connection = connection
        super().__init__(message)


class MeshError(FluidccError):
    pass


class JunctionError(MeshError):
    pass


class StlError(FluidccError):
    pass


class SimulationError(FluidccError):
    pass


class CycleError(SimulationError):
    pass


class NoOscillationError(SimulationError):
    pass
