"""Distributional values for stochastic cooperative games."""

from .errors import (
    AlreadyMember,
    BadPermutation,
    BridgeStartFailure,
    BridgeTimeout,
    DistvalError,
    IndexOutOfRange,
    InvalidClasses,
    InvalidWeights,
    NegativeSigma,
    NonFinite,
    NormalizationFailure,
    NotNormalized,
    OracleFailure,
    OutOfRange,
    ProtocolViolation,
    SelfMembership,
    SpecValidation,
    TooManyPlayers,
    UnsupportedFamily,
)
from .games import (
    BernoulliParams,
    CategoricalParams,
    Coalition,
    GaussianParams,
    MixtureGame,
    StochasticGame,
    coalition_insert,
    enumerate_subsets,
    enumeration_limit,
    query_payoff,
)
from .marginals import (
    BernoulliMC,
    CategoricalMC,
    GaussianMC,
    bernoulli_mc,
    categorical_mc,
    categorical_no_change,
    softmax,
)
from .structures import (
    CoalitionStructure,
    is_efficient,
    is_symmetric,
    make_custom,
    make_leave_one_out,
    make_random_order,
    make_shapley,
    make_size_weighted,
    sample_coalition,
    uniform_permutation_pmf,
)
from .values import (
    BernoulliValue,
    CategoricalValue,
    GaussianValue,
    MCResult,
    ValueStats,
    bernoulli_variance,
    entropy,
    exact_value,
    exact_values,
    expectation,
    flip_away,
    format_transition,
    importance,
    mc_value,
    mc_value_sampled,
    mode_change,
    summarize,
    top_transitions,
)
from .builders import (
    GameSpec,
    build_bridge_game,
    build_game,
    export_table_spec,
    masked_input,
    parse_game_spec,
    xor_game,
)

__version__ = "0.1.0"
