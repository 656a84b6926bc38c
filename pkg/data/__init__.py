"""
Sector bases, ground-state cache and provider.
"""
