"""Margin-aware preference augmentation under the Bradley-Terry model."""

from ._core import *  # noqa: F401,F403
from ._core import MarsError, run_mars, verify_theorem

__all__ = [name for name in dir() if not name.startswith("_")]
