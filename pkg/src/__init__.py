"""grassfield - Adaptive parameter-space sampling driven by Grassmann-manifold distances"""

__version__ = "0.1.0"
