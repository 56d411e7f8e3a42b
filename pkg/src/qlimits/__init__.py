"""qlimits: a numerical laboratory for finite-rank truncations of unitary
evolution and for time limits on the quality of quantum measurements.

Dense finite-dimensional proxies stand in for the separable Hilbert space:
observables truncate to projector sandwiches with verified error, coarse
measurement devices truncate readout sums at a particle cutoff, and the
distinguishability of coarse and perfect devices is fitted against the
linear-in-time bound governed by the tail sums of the apparatus/particle
mixing matrix.
"""

__version__ = "0.1.0"

from .hilbert import (  # noqa: F401
    HermitianOperator,
    SpectralDecomposition,
    StateVector,
    TimeGrid,
    evolve,
    expectation,
    heisenberg_observable,
    operator_norm,
    spectral_decompose,
)
from .truncation import (  # noqa: F401
    TruncationPair,
    TruncationReport,
    make_truncation,
    minimal_rank_for_epsilon,
    truncate_operator,
    truncated_evolution,
    truncation_error,
)
from .measurement import (  # noqa: F401
    CompositeModel,
    MeasurementDevice,
    ReadoutCurve,
    build_device,
    exact_oracle_readout,
    free_readout,
    gamma_phase,
    interacting_readout,
    quality,
)
from .fidelity import (  # noqa: F401
    CoarseningSpec,
    FidelityReport,
    MixingMatrix,
    bound_chain_rhs,
    characteristic_time,
    fidelity_gap,
    fit_bound_constant,
    mixing_matrix,
    peres_condition_check,
    quality_with_cutoff,
    speed_limit_check,
)
from .echo import EchoCurve, EnsembleSpec, echo_experiment, ensemble_echo  # noqa: F401
from .sampling import sample_composite_model, sample_device, sample_gue, sample_state  # noqa: F401
