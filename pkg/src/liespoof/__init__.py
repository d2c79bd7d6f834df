"""Transferability of sensor-spoofing attacks on Lie-group systems."""

from .lie_core import SE2, LieGroupSpec, SE2Group, get_group, load_group_spec

__all__ = ["SE2", "LieGroupSpec", "SE2Group", "get_group", "load_group_spec"]
__version__ = "0.1.0"
