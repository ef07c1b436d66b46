"""Galerkin laboratory for root functions of non-self-adjoint Sturm-Liouville problems."""

__version__ = "0.1.0"
