"""Periodic Camassa-Holm hierarchy: spectral solver, flow maps, commutator calculus and peakons."""

from . import commutator, diffpoly, eulerian, peakons, spectral, taylor
from .spectral import PeriodicField, PeriodicGrid

__all__ = [
    "PeriodicField",
    "PeriodicGrid",
    "commutator",
    "diffpoly",
    "eulerian",
    "peakons",
    "spectral",
    "taylor",
]

__version__ = "0.1.0"
