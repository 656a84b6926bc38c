"""
Utility package: helpers, errors, qubism images, fractal codec and charts.
"""
