"""Trotterised Ising-chain quenches under synthetic noise, and their mitigation."""

from __future__ import annotations

__version__ = "0.1.0"

from .kernels import BACKEND
from .model import ModelParams, ProductState, TimeGrid

__all__ = ["BACKEND", "ModelParams", "ProductState", "TimeGrid", "__version__"]
