"""Generalized communicating P systems and population protocols."""

from ._core import *  # noqa: F401,F403
from ._core import (
    CapacityError,
    ConvergenceError,
    Error,
    HaltedError,
    IntegrationError,
    Model,
    ModelError,
    ParseError,
    Rule,
    RuleNotApplicable,
)

__version__ = "0.1.0"
