"""Extended Hilbert scales on computable spectral models."""
__version__ = "0.1.0"
