from ._grf import (GrfSpec, SquareWaveSpec, sample_grf, sample_square_wave, square_wave_ic, sample_initial_condition,
                   covariance_matrix)
from ._spec import PdeSpec, FAMILIES, REACTIONS
from ._solvers import (solve, solve_advection, solve_heat, solve_wave, solve_burgers, solve_reaction_diffusion,
                       solve_navier_stokes, solve_kuramoto_sivashinsky, velocity_from_vorticity, spectral_divergence,
                       navier_stokes_forcing, reaction_term, etd_coefficients)
from ._dataset import (TaskDataset, build_dataset, split_dataset, save_dataset, load_dataset, splitmix64,
                       pde_spec_from_provenance, ic_spec_from_provenance)
from ._recipes import Recipe, RECIPES, SEQUENCE_1D, SEQUENCE_2D, recipe

__all__ = ['GrfSpec', 'SquareWaveSpec', 'sample_grf', 'sample_square_wave', 'square_wave_ic',
           'sample_initial_condition', 'covariance_matrix', 'PdeSpec', 'FAMILIES', 'REACTIONS', 'solve',
           'solve_advection', 'solve_heat', 'solve_wave', 'solve_burgers', 'solve_reaction_diffusion',
           'solve_navier_stokes', 'solve_kuramoto_sivashinsky', 'velocity_from_vorticity', 'spectral_divergence',
           'navier_stokes_forcing', 'reaction_term', 'etd_coefficients', 'TaskDataset', 'build_dataset',
           'split_dataset', 'save_dataset', 'load_dataset', 'splitmix64', 'pde_spec_from_provenance',
           'ic_spec_from_provenance', 'Recipe', 'RECIPES', 'SEQUENCE_1D', 'SEQUENCE_2D', 'recipe']
