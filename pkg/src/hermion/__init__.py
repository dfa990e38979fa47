"""Hermite-spectral solver for i u_t - H u = F(u) with time-frequency diagnostics."""

from .hermite_basis import (GridField, HermiteField, QuadratureRule, analyze, gauss_hermite_grid,
                            gauss_hermite_rule, hermite_1d, hermite_nd, synthesize, uniform_grid)
from .nonlinearity import (FourierMultiplier, GridKernel, Hartree, RealEntireSeries, hartree_kernel_fourier,
                           hartree_term, hls_ratio, kernel_split, power_nonlinearity, real_entire_apply,
                           split_by_level, trilinear_ratio)
from .propagator import SpectralMultiplier, apply_multiplier, evolve_linear, projection
from .solver import (EvolutionTrace, HartreeLaw, PowerLaw, SeriesLaw, SolverConfig, admissible_pair,
                     evolve_nonlinear, local_existence_time, picard_solve, spacetime_norm)
from .tf_analysis import TFLattice, fourier_wigner, modulation_norm, special_hermite, stft

__version__ = "0.1.0"
