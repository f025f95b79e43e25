"""Quantum and Koopman-von Neumann wave mechanics on grids, with measurement experiments."""
from .errors import DataError, KvnlabError, ParameterError
from .numerics import (ComplexField1D, ComplexField2D, Grid1D, Grid2D, RealField1D, RealField2D,
                       dft_x_to_p, idft_p_to_x, dft2_phi_to_lambda, idft2_lambda_to_phi,
                       local_extrema, moments, norm_sq)
from .quantum import QmState, evolve_free, evolve_split_step, gaussian_packet
from .kvn import (HamiltonianSpec, KvnState, evolve_characteristics, evolve_free_exact,
                  gaussian_phase_space)
from .report import ExperimentReport, GoldenReport

__version__ = "0.1.0"

__all__ = [
    "DataError", "KvnlabError", "ParameterError",
    "ComplexField1D", "ComplexField2D", "Grid1D", "Grid2D", "RealField1D", "RealField2D",
    "dft_x_to_p", "idft_p_to_x", "dft2_phi_to_lambda", "idft2_lambda_to_phi",
    "local_extrema", "moments", "norm_sq",
    "QmState", "evolve_free", "evolve_split_step", "gaussian_packet",
    "HamiltonianSpec", "KvnState", "evolve_characteristics", "evolve_free_exact", "gaussian_phase_space",
    "ExperimentReport", "GoldenReport",
]
