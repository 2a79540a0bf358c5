"""Compile fluidic logic netlists into printable tube networks."""

__version__ = "0.1.0"

from .errors import FluidccError
from .netlist import CircuitParams, Netlist, load_netlist, parse_netlist

__all__ = ["__version__", "FluidccError", "CircuitParams", "Netlist", "load_netlist", "parse_netlist"]
