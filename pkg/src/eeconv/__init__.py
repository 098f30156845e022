"""Graph framelets, Dirichlet energy and energy-enhanced graph convolution."""

__version__ = "0.1.0"
