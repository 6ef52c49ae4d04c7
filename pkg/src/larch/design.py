# -*- test-case-name: larch.test.test_design -*-
"""
The lagged regression representation C{y = X phi + Z} of a realized series,
and the Gram matrices it induces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

from .boundaries import FloatArray, InvalidInput
from .process import TimeSeries


@dataclass(frozen=True, eq=False)
class LagDesign:
    """
    A response vector and its lagged design matrix: row C{t} of C{X} holds
    C{X_(t-1), ..., X_(t-p)} and C{y[t]} holds C{X_t}.
    """

    y: FloatArray
    X: FloatArray

    def __post_init__(self) -> None:
        y = np.array(self.y, dtype=np.float64)
        X = np.array(self.X, dtype=np.float64)
        if y.ndim != 1 or X.ndim != 2 or X.shape[0] != y.size:
            raise InvalidInput(
                f"y of shape {y.shape} does not match X of shape {X.shape}"
            )
        if y.size < 1 or X.shape[1] < 1:
            raise InvalidInput("a design needs n >= 1 rows and p >= 1 lags")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def p(self) -> int:
        return int(self.X.shape[1])

    def rows(self, indices: npt.ArrayLike) -> LagDesign:
        """
        The sub-design made of the given rows.
        """
        selected = np.asarray(indices, dtype=np.int64)
        return LagDesign(self.y[selected], self.X[selected])


def buildDesign(series: TimeSeries, p: int, trim: bool = False) -> LagDesign:
    """
    Assemble C{(y, X)} from C{series}.

    By default all C{n} usable values are responses and the lags of the
    earliest rows come from the retained pre-sample values.  With C{trim},
    for data without pre-sample values, the first C{p} values only serve as
    lags and C{n} shrinks accordingly.

    @raise InvalidInput: if the series retains fewer than C{p} pre-sample
        values (and C{trim} is not set), or is too short to trim.
    """
    if p < 1:
        raise InvalidInput(f"p must be at least 1, not {p}")
    values = series.values
    if trim:
        offset = p
        if values.size <= p:
            raise InvalidInput(
                f"series of length {values.size} is too short to trim "
                f"{p} lags"
            )
    else:
        offset = series.pPresample
        if offset < p:
            raise InvalidInput(
                f"p = {p} lags need p_presample >= {p}, series retains "
                f"{offset}; pass trim to drop the first {p} rows instead"
            )
    n = values.size - offset
    windows = sliding_window_view(values[offset - p : offset + n - 1], p)
    return LagDesign(values[offset:], windows[:, ::-1])


def gram(design: LagDesign) -> FloatArray:
    """
    The normalized Gram matrix C{X'X / n}.
    """
    X = design.X
    product: FloatArray = (X.T @ X) / design.n
    return (product + product.T) / 2


@dataclass(frozen=True)
class GramDeviation:
    """
    How far a sample Gram matrix is from a reference matrix.

    @ivar frobenius: The Frobenius norm of the difference.
    @ivar maxAbs: The largest entrywise absolute difference.
    """

    frobenius: float
    maxAbs: float


def gramDeviation(design: LagDesign, gammaP: FloatArray) -> GramDeviation:
    """
    Compare C{X'X / n} with the theoretical autocovariance matrix C{gammaP}.
    """
    reference = np.asarray(gammaP, dtype=np.float64)
    if reference.shape != (design.p, design.p):
        raise InvalidInput(
            f"reference matrix of shape {reference.shape} does not match "
            f"p = {design.p}"
        )
    difference = gram(design) - reference
    return GramDeviation(
        float(np.linalg.norm(difference, "fro")),
        float(np.max(np.abs(difference))),
    )


__all__ = [
    "GramDeviation",
    "LagDesign",
    "buildDesign",
    "gram",
    "gramDeviation",
]
