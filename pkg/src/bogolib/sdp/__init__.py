"""Semidefinite programming: solver, covariance-matrix-criterion builders, I/O."""
from .problem import LmiBlock, SdpProblem
from .solver import SdpSolution, SdpStatus, solve

__all__ = ["LmiBlock", "SdpProblem", "SdpSolution", "SdpStatus", "solve"]
