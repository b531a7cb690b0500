"""Analysis toolkit for planar switching polynomial systems.

Exact polynomial/series algebra, nilpotent singular point classification,
high-precision generalized Lyapunov constants for systems split by the
x-axis, bi-center certification, limit-cycle bifurcation tools, and phase
portraits.
"""

__version__ = "0.1.0"
