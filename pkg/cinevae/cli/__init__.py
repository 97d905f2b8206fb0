"""CLI helpers for cinevae."""

from .init_cmd import init_experiment

__all__ = ["init_experiment"]
