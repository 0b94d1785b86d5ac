"""Coordinate minimization on the orthogonal group by Givens rotations,
with sparse PCA, orthogonal tensor decomposition and a spherical GMM
pipeline built on it."""

from .descent import CoordinateObjective, DescentTrace, GeodesicObjective, StoppingRule, coordinate_minimize
from .flops import FlopCounter
from .gmm import GmmModel, fit_gmm, nmi, sample_gmm
from .manifold import GivensRotation, make_givens, random_orthogonal, rotate_columns
from .spca import solve_for_z, spca_full
from .streaming import streaming_spca
from .tensor import synth_orthogonal_tensor, tensor_decompose

__version__ = "0.1.0"
