"""Python bindings for the sublab library."""

from ._sublab import (
    BallEscapesBox,
    CflViolation,
    ConfigError,
    ConvergenceFailure,
    DegenerateRatio,
    DimensionMismatch,
    DisconnectedField,
    DistanceField,
    DomainError,
    Family,
    Frame,
    HormanderFailure,
    NonFiniteState,
    ParseError,
    SublabError,
    ball_volume,
    cfl_limit,
    compute_theta,
    distance_field,
    doubling_ratio,
    fitted_field,
    load_frame,
    parse_frame,
    poincare_estimate,
    solve,
    sweep,
    sweep_row,
)

__version__ = "0.1.0"
