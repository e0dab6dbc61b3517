"""
Command-line interface module initialization.
"""
