"""Distributed dual proximal gradient: node handlers, a discrete-event simulator and reference oracles."""

from ._kernels import BACKEND
from .algorithms import MODES, AlgorithmConfig, Network
from .dual import DualLayout, DualState, dual_cost, lipschitz_constants
from .functions import (
    BoxIndicatorFn,
    L1PlusBoxFn,
    QuadraticBoxFn,
    ScaledL1Fn,
    ZeroFn,
)
from .graph import Graph, erdos_renyi, is_connected, neighbors
from .problem import ProblemInstance
from .reference import centralized_solve
from .simnet import Trace, run

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "MODES", "AlgorithmConfig", "Network", "DualLayout", "DualState", "dual_cost",
    "lipschitz_constants", "BoxIndicatorFn", "L1PlusBoxFn", "QuadraticBoxFn", "ScaledL1Fn", "ZeroFn",
    "Graph", "erdos_renyi", "is_connected", "neighbors", "ProblemInstance", "centralized_solve",
    "Trace", "run",
]
