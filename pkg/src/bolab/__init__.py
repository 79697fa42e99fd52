"""Spectral laboratory for the Benjamin-Ono equation on a large torus.

Subpackages: spectral substrate, gauge transform, time evolution, normal form
reduction machinery, scaling-estimate experiments, and a batch CLI.
"""

__version__ = "0.1.0"
