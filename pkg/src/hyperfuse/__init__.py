"""Exact simulation of polarization-spatial hyper-W state fusion."""

__version__ = "0.1.0"
