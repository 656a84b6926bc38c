"""
Configuration package for the Schwinger fractal-ansatz toolkit.
"""
