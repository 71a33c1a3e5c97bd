"""
ctxrep
Version-history context for code representation
"""

__version__ = "1.0.0"
