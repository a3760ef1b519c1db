"""Asymptotic-preserving solvers for 1D gray radiative transfer.

Modules
-------
core        grids, quadrature, opacities, boundary data, states
linalg      Thomas / block-Thomas sweeps and scalar Newton kernels
diffusion   three-stage and reference solvers for the diffusion limit
transport   the prediction-correction-projection AP scheme
reference   explicit upwind and Picard-implicit reference solvers
harness     run driver, convergence and stability sweeps, CSV/JSON output
"""

__version__ = "0.1.0"
