"""Exact finite-precision (phi,Gamma)-module computations over the Fontaine ring."""

__version__ = "0.1.0"
