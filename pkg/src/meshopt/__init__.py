"""Simulation and gradient-based optimization of universal MZI meshes.

Submodules:

* :mod:`meshopt.core` -- complex linear algebra, seeded RNG, Haar sampling.
* :mod:`meshopt.mesh` -- mesh architectures, MZI physics, propagation.
* :mod:`meshopt.haar` -- sensitivity indices, Haar phases, initialization.
* :mod:`meshopt.decompose` -- rectangular decomposition of unitaries.
* :mod:`meshopt.train` -- analytic gradients, Adam/SGD, training loops.
* :mod:`meshopt.analysis` -- bandsize metric, error maps, grid exports.
* :mod:`meshopt.cli` -- command-line front end.
"""

from .core import (gram_schmidt_haar, is_unitary, mse_cost,
                   random_unit_columns, seeded_rng)
from .mesh import (BeamsplitterErrors, FixedPermutation, MeshSpec, MziColumn,
                   PhaseParams, forward, mesh_unitary, mzi_matrix,
                   permuting_spec, propagate_fields, rectangular_spec,
                   reflectivity, transmissivity, transmissivity_with_error,
                   triangular_spec)
from .haar import (SensitivityMap, average_reflectivity,
                   average_transmissivity, canonicalize_theta, haar_initialize,
                   haar_pdf, haar_phase_from_theta, periodic_haar_phase,
                   sensitivity_closed_form_rect, sensitivity_reachable,
                   theta_from_haar_phase, theta_std, uniform_initialize)
from .decompose import clements_decompose
from .train import (AdamState, PhaseGradients, SvdModel, TrainConfig,
                    TrainTrace, adam_step, finite_difference_gradients,
                    gradients, svd_matrix, svd_test_cost, train_cost,
                    train_svd, train_unitary)
from .analysis import Bandsize, bandsize, checkerboard, error_map

__version__ = "0.1.0"
