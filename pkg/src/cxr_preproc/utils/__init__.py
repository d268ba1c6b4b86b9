"""Utility modules for the CXR pre-processing pipeline."""
