"""Finite truncations of coarse spaces: property-A witnesses, banded operators
and operator norm localization."""
from .core import (
    DegreeBound,
    Entourage,
    Space,
    ball,
    bounded_witness,
    compose,
    degree,
    diagonal,
    empty_relation,
    full_relation,
    intersection,
    inverse,
    power,
    symmetrize,
    union,
)
from .errors import (
    CoarseLabError,
    ConfigError,
    ConvergenceError,
    DegenerateVectorError,
    InputError,
    NotPSDError,
    NumericalError,
    PreconditionError,
    SchemaError,
    SpaceMismatchError,
    UnknownPointError,
    WitnessViolation,
)

__version__ = "0.1.0"
