"""Lace-expansion diagram toolkit: graph algebra, H-reduction, lattice sums, percolation."""

__version__ = "0.1.0"
