"""Simulation and verification toolkit for kinetic coagulation-fragmentation.

Submodules
----------
state_space   merge/split kinematics and admissibility
kernels       kernel builtins, B_1 and Gronwall constants
stochastics   reproducible streams, samplers and Monte-Carlo quadrature
audit         numerical checks of the kernel hypotheses
homogeneous   deterministic sectional solver (mass only)
dsmc          stochastic particle simulator for the full model
diagnostics   moment series, ledgers, manifests and estimate checks
"""
__version__ = "0.1.0"

from .diagnostics import gronwall_bound
from .kernels import B1, KernelSuite, gronwall_constant, make_coag, make_frag
from .state_space import ParticleState, States, admissible, coalesce, split
from .stochastics import StreamKey

__all__ = [
    "B1",
    "KernelSuite",
    "ParticleState",
    "States",
    "StreamKey",
    "admissible",
    "coalesce",
    "gronwall_bound",
    "gronwall_constant",
    "make_coag",
    "make_frag",
    "split",
    "__version__",
]
