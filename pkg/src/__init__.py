"""
xtproc: extremal t max-stable processes
"""

__version__ = '0.1.0'
