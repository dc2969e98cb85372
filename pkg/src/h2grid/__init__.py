"""Simulation of an islanded, storage-less microgrid in which a DFIG wind
turbine supplies an alkaline electrolyzer."""

__version__ = "0.1.0"
