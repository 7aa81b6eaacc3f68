"""Counter-based power models for DVFS-capable accelerators."""

__version__ = "0.1.0"
