"""domlab: numerical laboratory for conservative torus maps with dominated splittings."""

__version__ = "0.1.0"
