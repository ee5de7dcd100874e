"""Effective nonlocal kernels of linear reaction-diffusion networks."""

from __future__ import annotations

__version__ = "0.1.0"
