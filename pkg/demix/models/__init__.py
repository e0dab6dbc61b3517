"""
Models module initialization.
"""
