"""Quantum work statistics: measurement schemes, their conditions, and numerical experiments."""

from .core import GibbsState, PiProcess, Process, gibbs, how_operator
from .schemes import WorkDistribution, WorkScheme, distribution

__version__ = "0.1.0"
