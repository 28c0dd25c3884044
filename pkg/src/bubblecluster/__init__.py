"""Cluster-of-bubbles ansatz and verification toolkit for the planar
Lane-Emden problem -Delta u = |u|^{p-1} u with zero Dirichlet data."""

__version__ = "0.1.0"
