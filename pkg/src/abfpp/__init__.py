"""Two-valued first passage percolation on the rotated lattice."""

__version__ = "0.1.0"
