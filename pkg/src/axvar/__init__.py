"""Axially-variant kernel convolution model for ultrasound imaging.

Matrix-free forward and adjoint operators, Kronecker-structured padding
and an elastic-net deconvolution solver.
"""

from .axial_model import (
    AxialKernelStack,
    ForwardModel,
    adjoint_H,
    forward_H,
    gradient_datafit,
    materialize_H,
    simulate,
)
from .padding import PadMode, SparseOperator, make_pad_1d, make_pad_2d
from .solver import SolverConfig, SolverReport, deconvolve, objective, prox_elastic_net

__version__ = "0.1.0"
