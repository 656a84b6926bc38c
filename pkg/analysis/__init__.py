"""
Numerical engines: Hamiltonian, eigensolver, fractal ansatz and observables.
"""
