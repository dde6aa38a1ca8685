"""Numerical lab for low-energy nodal solutions of the Lane-Emden problem
``-lap u = |u|^{p-1} u`` in a planar domain with zero boundary values."""

__version__ = "0.1.0"
