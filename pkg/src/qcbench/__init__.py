"""Benchmarking toolkit for gate-based quantum backends.

The package bundles a reference density-matrix emulator with a configurable
noise model and seven metric suites (architecture probes, qubit quality,
gate quality, circuit quality, well-studied tasks, speed, stability) that
run against any backend exposing the uniform execution interface.
"""

__version__ = "0.1.0"
