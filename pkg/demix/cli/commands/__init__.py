"""
CLI subcommands module initialization.
"""
