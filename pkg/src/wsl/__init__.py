"""Waveguide star-shaped laboratory.

Dirichlet Laplacians on planar waveguide domains: geometry checks, closed-form
cross-section spectra, finite-difference resolvents with modal
Dirichlet-to-Neumann closures, resonance scans on the Riemann surface of the
cylindrical ends, wave decay experiments and multiplier identity checks.
"""

__version__ = "0.1.0"
