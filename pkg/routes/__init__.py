"""
This package contains the command routes of the laboratory.
"""

from .experiment_routes import build_parser

__all__ = ["build_parser"]
