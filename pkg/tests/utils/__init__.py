"""
Utility module tests.
""" 