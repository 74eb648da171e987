"""Rotationally symmetric model manifolds: volume-growth criteria, heat
flow, radial diffusions and explicit two-ended constructions."""

from . import construct, criteria, heat, profile, sde
from .errors import (InputError, ModelmanError, NumericError, ParameterDomainError,
                     PolicyError, VerificationError)

__version__ = "0.1.0"

__all__ = ["construct", "criteria", "heat", "profile", "sde", "ModelmanError",
           "InputError", "NumericError", "ParameterDomainError", "PolicyError",
           "VerificationError"]
