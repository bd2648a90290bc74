"""Residual-action reinforcement learning for planar reference tracking.

A self-contained stack: planar articulated-chain simulator with PD
actuation (compiled kernel + numpy fallback), reference motion library,
two-stage start-state sampling, vectorized tracking rewards, dense
networks with exact gradients, PPO, and an experiment harness.
"""

from .backend import BACKEND, available_backends

__version__ = "0.1.0"

__all__ = ["BACKEND", "available_backends", "__version__"]
