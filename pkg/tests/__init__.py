"""
Unit tests for the Rotterdam Time Machine project.
""" 