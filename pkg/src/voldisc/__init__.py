"""Discrete multi-term Volterra equations with existence families.

The subpackages are importable individually; importing the package registers
every kernel kind so that textual kernel forms resolve.
"""

from __future__ import annotations

from . import errors, fracdiff, linopspace, mlcontinuous, poisson, resolvent, seqkernel, solver
from .errors import (AccuracyWarning, CertificationError, ConvergenceError, DomainError,
                     HorizonError, PreconditionError, ScenarioError, SeedError, ShapeError,
                     SingularityError, SummabilityRefusal, UnsupportedInstanceError,
                     VoldiscError)
from .linopspace import LinOp
from .resolvent import ExistenceFamily, ProblemSpec, build_family, build_family_shifted
from .seqkernel import BiSequence, Decay, GridSequence, KernelSpec

__version__ = "0.1.0"

__all__ = [
    "errors", "fracdiff", "linopspace", "mlcontinuous", "poisson", "resolvent", "seqkernel",
    "solver", "AccuracyWarning", "CertificationError", "ConvergenceError", "DomainError",
    "HorizonError", "PreconditionError", "ScenarioError", "SeedError", "ShapeError",
    "SingularityError", "SummabilityRefusal", "UnsupportedInstanceError", "VoldiscError",
    "LinOp", "ExistenceFamily", "ProblemSpec", "build_family", "build_family_shifted",
    "BiSequence", "Decay", "GridSequence", "KernelSpec",
]
