"""
L{larch.boundaries} describes the boundaries between different parts of the
system and its interface with your application code.  It contains
L{Protocol}s, type aliases, enumerations, constants and exception types, but
no numerical logic of its own.
"""

from __future__ import annotations

from enum import Enum
from typing import Any, Callable, Iterable, Protocol, TypeVar

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
"""
A one- or two-dimensional array of double-precision floats; vectors of
coefficients, series values, design and Gram matrices.
"""

IntArray = npt.NDArray[np.int64]
"An array of integers, usually row indices."

JSONObject = dict[str, Any]
"""
A loose description of a JSON-dumpable object.
"""

Lag = int
"""
A 1-based autoregressive lag index; lag C{j} is column C{j - 1} of a
L{larch.design.LagDesign}.
"""

Item = TypeVar("Item")
"TypeVar for the inputs of work distributed by a L{ReplicationDriver}."
Result = TypeVar("Result")
"TypeVar for the outputs of work distributed by a L{ReplicationDriver}."

JSONableSelf = TypeVar("JSONableSelf", bound="JSONable")
"""
TypeVar for binding C{cls} on L{JSONable.fromJSON}.
"""


class LarchError(Exception):
    """
    Base class of every error raised deliberately by this library.
    """


class InvalidInput(LarchError, ValueError):
    """
    An argument violated a documented precondition: wrong shape, out of range,
    or a malformed file.
    """


class DomainError(LarchError, ValueError):
    """
    A mathematical object was outside the domain where an operation is
    defined; for example a non-causal autoregressive polynomial.
    """


class DegenerateInput(InvalidInput):
    """
    The input carries no information for the requested estimate, such as a
    constant series handed to a Yule-Walker fit.
    """


class UnboundedPath(InvalidInput):
    """
    A lag with zero penalty weight is correlated with the response, so no
    finite penalty level zeroes every coefficient.
    """


class SingularMatrix(LarchError, ArithmeticError):
    """
    A matrix that needed to be inverted was (numerically) singular.
    """


class NonConvergence(LarchError, ArithmeticError):
    """
    Coordinate descent ran out of sweeps before certifying its iterate.

    @ivar best: The iterate with the smallest KKT residual, as a
        L{larch.lasso.LassoFit}.
    @ivar kktResidual: The KKT residual of C{best}.
    @ivar gridIndex: When raised while computing a solution path, the index of
        the grid point whose fit did not converge; otherwise C{None}.
    """

    def __init__(
        self, message: str, best: Any, kktResidual: float
    ) -> None:
        super().__init__(message)
        self.best = best
        self.kktResidual = kktResidual
        self.gridIndex: int | None = None


class ExperimentFailure(LarchError, RuntimeError):
    """
    Too many replications of a Monte-Carlo experiment failed for its report
    to be meaningful.
    """


class Verdict(Enum):
    """
    The outcome of evaluating one condition or bound for a concrete instance.
    """

    PASS = "PASS"
    """
    The condition holds, or the bound is informative (below 1).
    """

    FAIL = "FAIL"
    """
    The condition does not hold for this instance.
    """

    VACUOUS = "VACUOUS"
    """
    A probability bound evaluated to 1 or more and so says nothing.
    """

    NA = "N-A"
    """
    The condition is undefined for this instance (e.g. an empty support).
    """


class CvScheme(Enum):
    """
    How cross-validation partitions the rows of a design.
    """

    rows = "rows"
    """
    Uniformly random K-fold partition of the rows.
    """

    rolling = "rolling"
    """
    Rolling origin: contiguous blocks, each predicted from the blocks before
    it.
    """


class CvRule(Enum):
    """
    How cross-validation picks a penalty level from its error curve.
    """

    minimum = "minimum"
    """
    The grid value with the smallest mean held-out error.
    """

    oneStandardError = "one-se"
    """
    The largest grid value whose mean held-out error is within one standard
    error of the smallest.
    """


class JSONable(Protocol):
    """
    Methods that allow a value to be written to and read back from the JSON
    formats described in L{larch.persistent.jsonable}.
    """

    def toJSON(self) -> JSONObject:
        """
        Convert this value to a JSON-serializable dictionary.
        """

    @classmethod
    def fromJSON(cls: type[JSONableSelf], json: JSONObject) -> JSONableSelf:
        """
        Load an instance of this type from a deserialized JSON object in the
        format produced by L{toJSON <JSONable.toJSON>}.
        """


class ReplicationDriver(Protocol):
    """
    Driver interface that allows independent pieces of work (usually
    Monte-Carlo replications) to be executed serially, or on some third party
    library's pool of workers.
    """

    def map(
        self, work: Callable[[Item], Result], items: Iterable[Item]
    ) -> list[Result]:
        """
        Call C{work} once for each of C{items} and return the results in the
        same order as C{items}, regardless of the order of execution.

        @note: C{work} may be executed in another process, so it must be
            picklable (a module-level function or a L{functools.partial} of
            one).
        """


__all__ = [
    "CvRule",
    "CvScheme",
    "DegenerateInput",
    "DomainError",
    "ExperimentFailure",
    "FloatArray",
    "IntArray",
    "InvalidInput",
    "JSONObject",
    "JSONable",
    "Lag",
    "LarchError",
    "NonConvergence",
    "ReplicationDriver",
    "SingularMatrix",
    "UnboundedPath",
    "Verdict",
]
