"""Witten spinors, Dirac Green's functions and mass identities on compactified asymptotically flat models."""

__version__ = "0.1.0"
