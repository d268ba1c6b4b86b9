"""Chest X-ray pre-processing experiment pipeline."""

__version__ = "0.1.0"
__author__ = "CXR Preproc Team"
__email__ = "team@example.com"
