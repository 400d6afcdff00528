"""Channel estimation for dynamic metasurface antennas with unfolded sparse solvers."""

__version__ = "0.1.0"
