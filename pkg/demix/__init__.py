"""
Dictionary Demixing Toolkit

Convex decomposition of a data matrix into a low-rank part plus a dictionary-sparse part,
with incoherence diagnostics, phase-transition harnesses and hyperspectral target localization.
"""

__version__ = "1.0.0"
