"""
Utilities module initialization.
"""
