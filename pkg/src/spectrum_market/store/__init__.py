"""
Data Store Layer for the spectrum market solvers

This module provides unified file access for sweep tables, equilibrium
results, certificates and reproduction reports (FileManager).
"""

from .file_manager import FileManager, to_jsonable

__all__ = ['FileManager', 'to_jsonable']
