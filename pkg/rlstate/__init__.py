# rlstate/__init__.py
"""Rugby league game-state engine: multi-task mixture density network and analytics."""

__version__ = "0.1.0"
