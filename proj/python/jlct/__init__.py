"""Joint latent class trees for longitudinal and time-to-event data."""

from ._core import JlctError, Model, default_roles, fit, simulate

__all__ = ["JlctError", "Model", "default_roles", "fit", "simulate"]
