"""Tests for the CXR pre-processing pipeline."""
