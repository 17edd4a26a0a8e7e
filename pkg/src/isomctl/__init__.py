"""Dissipative quantum control toolkit for a 1D photoisomerization model."""

__version__ = "0.1.0"
