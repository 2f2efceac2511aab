"""cspgap: pairwise-independent predicate mixtures, Boolean Fourier
analysis, and two-round SDP rounding experiments for Max k-CSP gap
instances."""

from .errors import (
    CapacityError,
    CspGapError,
    DegenerateProfileError,
    DisjointnessError,
    IncompleteSubstitutionError,
    InfeasibleBiasError,
    IntegralityError,
    InvalidDistributionError,
    InvalidRequestError,
    MalformedInstanceError,
    PreconditionError,
)
from .predicates import (
    BiasProfile,
    DisguiseWeights,
    HomogeneousSlice,
    IndependenceReport,
    MixtureDistribution,
    SignVector,
    TestMoments,
    build_mixture,
    check_pairwise_independence,
    search_bias_profiles,
    slice_moments,
    solve_disguise,
    test_moments,
)
from .fourier import (
    FourierSpectrum,
    LowDegreeReport,
    PredicateSet,
    degree_coefficient,
    eval_degree3,
    low_degree_report,
    scan_degree3_support,
    trilinear_coefficient,
    wht_spectrum,
)
from .csp import (
    Assignment,
    BilinearForm,
    Constraint,
    CspInstance,
    TrilinearForm,
    extract_trilinear,
    gen_planted,
    gen_uniform,
    greedy_improve,
    merge_to_bilinear,
    objective_polynomial,
    objective_spectrum,
    substitute_group,
    value,
)
from .solver import (
    BiLinResult,
    GramVectors,
    QuadraticForm,
    RoundingConfig,
    bilin_two_round,
    cw_round,
    quadratic_from_bilinear,
    solve_relaxation,
)
from .oracle import MomentTables, OracleReport, brute_max_csp, brute_max_form, enumerate_moments

__version__ = "0.1.0"
