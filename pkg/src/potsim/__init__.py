"""Synthetic pottery image toolkit.

Profile extraction from drawings, surface-of-revolution meshing,
stochastic fracturing, domain-randomized rendering, vessel detection in
photographs, split generation and prior-weighted classifier evaluation.
"""

__version__ = "0.1.0"
