"""
Test suite for the ule_lab package.
"""
