"""
Command-line package for the Schwinger fractal-ansatz toolkit.
"""
