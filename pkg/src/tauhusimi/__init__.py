"""Finite-time Husimi densities, Wigner smearing and weak-measurement records."""

__version__ = "0.1.0"

from ._backend import BACKEND, HAVE_COMPILED
from .errors import NonHermitianError, NumericalContractError, ValidationError
from .grids import Axis, PhaseGrid, QuasiDistribution, auto_grid, fit_gaussian
from .husimi import (
    SemigroupEvaluator,
    coherent_reference,
    husimi_grid,
    husimi_grids,
    husimi_limit_diagnostic,
    normalization_constant,
    semigroup_at,
)
from .linalg import EigenDecomposition, eigh, herm_func, trace_product
from .models import (
    DensityMatrix,
    HilbertConfig,
    ObservableSet,
    StateSpec,
    bloch_vector,
    canonical_pair,
    make_state,
    number_operator,
    observables_from_labels,
    parse_state_spec,
    pauli_set,
)
from .spin import shell_limit, spin_husimi, spin_kernel, spin_normalization, spin_numerator
from .weak import (
    MeasurementRecord,
    born_limit,
    conditional_constant_density,
    kraus,
    record_density,
    sample_record,
    trotter_operator,
)
from .wigner import SmearingKernelCV, characteristic_function, smear, weyl_trace_check, wigner_grid
