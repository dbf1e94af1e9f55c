"""Bound states in and below the radiation continuum for a double array of
thin dielectric cylinders, and the associated scattering problem."""

from .channels import BlochPoint, classify, open_channels, thresholds
from .lattice_sums import ArrayConfig, delta0, lattice_sums, determinant

__version__ = "0.1.0"
