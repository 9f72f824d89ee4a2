"""Multi-view depth evaluation protocol and a classical plane-sweep estimator.

Submodules are imported on demand; ``import mvdbench`` stays cheap so the
CLI can size numba's thread pool before numba loads.
"""

__version__ = "0.1.0"
