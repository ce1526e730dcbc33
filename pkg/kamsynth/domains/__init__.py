# Exact region domains and symbolic systems
from .base import ConcreteSimulator, Region, RegionAlgebra, SymbolicSystem, region_algebra
from .finite import FiniteRegion, FiniteSymbolicSystem, lift

__all__ = [
    "ConcreteSimulator",
    "FiniteRegion",
    "FiniteSymbolicSystem",
    "Region",
    "RegionAlgebra",
    "SymbolicSystem",
    "lift",
    "region_algebra",
]
