"""
Shared utilities: the error hierarchy with logging setup, and keyed random streams.
"""
