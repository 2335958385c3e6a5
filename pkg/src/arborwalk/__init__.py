"""Numerical laboratory for random coined quantum walks on homogeneous trees.

The tree of even degree q is the Cayley graph of the free group on q/2
generators; for odd q every generator is its own inverse.  A coin matrix
C in U(q) and a coin-conditioned shift define the one-step walk unitary
U(C); site-dependent random phases make it a disordered operator whose
spectral character (localized versus ballistic) depends on where C sits
relative to special permutation matrices.  This package provides the
operator machinery, finite-volume restrictions, transfer-matrix reduction
for q=3, combinatorial path oracles, and a batch experiment driver.
"""

from .coins import (CoinClass, CoinMatrix, boundary_permutation, classify_shape,
                    cycle_perm, family_q3_delocalizing, family_q3_localizing,
                    family_q4, haar_random, permutation_coin)
from .disorder import DensityTable, DisorderField, UniformFull, UniformInterval
from .errors import (CapacityError, ConditioningError, HorizonError,
                     ManifestError, NotLocalizingError, SingularParameterError)
from .spectral import (AmplitudeSeries, certified_propagating_returns,
                       diagonalize_block, fractional_moments,
                       free_shift_green_modulus, return_amplitudes,
                       wiener_average)
from .transfer import (BandUnitaryWindow, build_cyclic_basis, build_V,
                       decompose_T1, lyapunov, quotient_l, quotient_r,
                       realify, transfer_matrix)
from .tree import ROOT, Alphabet, BallIndex, Word, distance, enumerate_ball, reduce_word
from .walk import (FiniteVolumeOperator, InvariantBlock, SiteCoinField,
                   WalkOperator, build_finite_volume, build_shift, build_walk,
                   check_covariance, green, localizing_blocks)

__version__ = "0.1.0"
