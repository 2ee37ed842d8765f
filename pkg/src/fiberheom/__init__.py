"""HEOM simulation of polarization-entanglement decay in birefringent fibers."""
__version__ = "0.1.0"
