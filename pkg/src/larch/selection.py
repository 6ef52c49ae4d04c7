# -*- test-case-name: larch.test.test_selection -*-
"""
Model selection: cross-validated choice of the penalty level, extraction of
the selected lags, and the classical Yule-Walker/AIC baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log as _log, sqrt

import numpy as np
import numpy.typing as npt
from twisted.logger import Logger

from .boundaries import (
    CvRule,
    CvScheme,
    DegenerateInput,
    FloatArray,
    IntArray,
    InvalidInput,
    JSONObject,
    Lag,
)
from .design import LagDesign
from .lasso import (
    DEFAULT_SETTINGS,
    LassoFit,
    PenaltyConfig,
    SolutionPath,
    SolverSettings,
    fit,
    pathOnGrid,
)
from .process import TimeSeries, randomGenerator, sampleAutocovariance

log = Logger()

FOLD_STREAM = 1
"""
The random stream of a seed reserved for fold assignment, so that folds are
independent of a series simulated from the same seed.
"""


@dataclass(frozen=True, eq=False)
class CvResult:
    """
    Cross-validated prediction error along a grid of penalty levels.

    @ivar cvMean: Mean over folds of the held-out mean squared prediction
        error, one entry per grid point.
    @ivar cvSE: Standard error of C{cvMean} across folds.
    @ivar chosenLambda: The grid value picked by C{rule}.
    @ivar foldCount: The number of held-out blocks actually evaluated.
    """

    lambdaGrid: FloatArray
    cvMean: FloatArray
    cvSE: FloatArray
    chosenLambda: float
    foldCount: int
    seed: int
    scheme: CvScheme = CvScheme.rows
    rule: CvRule = CvRule.minimum

    def __post_init__(self) -> None:
        size = self.lambdaGrid.size
        if self.cvMean.shape != (size,) or self.cvSE.shape != (size,):
            raise InvalidInput("cv_mean and cv_se must match the grid")
        if self.chosenLambda not in self.lambdaGrid:
            raise InvalidInput(
                f"chosen lambda {self.chosenLambda!r} is not on the grid"
            )

    @property
    def chosenIndex(self) -> int:
        return int(np.flatnonzero(self.lambdaGrid == self.chosenLambda)[0])


def _partition(
    n: int, folds: int, seed: int, scheme: CvScheme
) -> list[tuple[IntArray, IntArray]]:
    """
    Training and held-out row indices for every evaluated fold.
    """
    if scheme is CvScheme.rolling:
        blocks = np.array_split(np.arange(n), folds)
        return [
            (np.concatenate(blocks[:k]), blocks[k]) for k in range(1, folds)
        ]
    order = randomGenerator(seed, FOLD_STREAM).permutation(n)
    parts = np.array_split(order, folds)
    return [
        (
            np.sort(np.concatenate(parts[:k] + parts[k + 1 :])),
            np.sort(parts[k]),
        )
        for k in range(folds)
    ]


def crossValidate(
    design: LagDesign,
    weights: npt.ArrayLike,
    grid: npt.ArrayLike,
    folds: int = 10,
    seed: int = 0,
    scheme: CvScheme = CvScheme.rows,
    settings: SolverSettings = DEFAULT_SETTINGS,
    rule: CvRule = CvRule.minimum,
) -> CvResult:
    """
    Estimate the prediction error of every penalty level on C{grid} by
    K-fold cross-validation over the rows of C{design}.

    With L{CvScheme.rows} the rows are partitioned uniformly at random,
    driven by C{seed}.  With L{CvScheme.rolling} the rows are cut into
    C{folds} contiguous blocks and each block after the first is predicted
    from a fit on all the blocks before it.

    With L{CvRule.minimum} the chosen level minimizes the mean held-out
    error, the larger level winning ties.  With L{CvRule.oneStandardError}
    it is the largest level whose mean error does not exceed that minimum
    plus its standard error.

    @raise InvalidInput: if C{folds < 2}, if there are fewer rows than
        folds, or if C{grid} is not strictly decreasing.
    """
    lambdas = np.array(grid, dtype=np.float64)
    if folds < 2:
        raise InvalidInput(f"folds must be at least 2, not {folds}")
    if design.n < folds:
        raise InvalidInput(
            f"{folds} folds need at least {folds} rows, design has {design.n}"
        )
    if lambdas.ndim != 1 or lambdas.size == 0:
        raise InvalidInput("grid must be a non-empty vector")
    if np.any(np.diff(lambdas) >= 0):
        raise InvalidInput("grid must be strictly decreasing")
    partition = _partition(design.n, folds, seed, scheme)
    errors = np.empty((len(partition), lambdas.size))
    for k, (training, heldOut) in enumerate(partition):
        path = pathOnGrid(design.rows(training), weights, lambdas, settings)
        predictions = design.X[heldOut] @ path.coefficients.T
        residuals = design.y[heldOut, np.newaxis] - predictions
        errors[k] = np.mean(residuals**2, axis=0)
    count = errors.shape[0]
    cvMean = errors.mean(axis=0)
    if count > 1:
        cvSE = errors.std(axis=0, ddof=1) / sqrt(count)
    else:
        cvSE = np.zeros(lambdas.size)
    chosen = best = int(np.argmin(cvMean))
    if rule is CvRule.oneStandardError:
        ceiling = cvMean[best] + cvSE[best]
        chosen = int(np.flatnonzero(cvMean <= ceiling)[0])
    log.info(
        "cross-validation over {folds} folds chose lambda={chosen} "
        "(grid point {index} of {size}, rule {rule})",
        folds=count,
        rule=rule.value,
        chosen=float(lambdas[chosen]),
        index=chosen,
        size=lambdas.size,
    )
    return CvResult(
        lambdas,
        cvMean,
        cvSE,
        float(lambdas[chosen]),
        count,
        seed,
        scheme,
        rule,
    )


def refitAtChoice(
    design: LagDesign,
    weights: npt.ArrayLike,
    cv: CvResult,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> LassoFit:
    """
    Fit the whole design at the cross-validated penalty level.
    """
    return fit(
        design,
        PenaltyConfig(cv.chosenLambda, np.asarray(weights, dtype=np.float64)),
        settings.tol,
        settings.maxIter,
    )


def nearestKnot(path: SolutionPath, lambdaN: float) -> int:
    """
    The index of the path knot nearest to C{lambdaN} in C{log lambda}; the
    larger knot wins ties.  Values outside the path's range snap to its
    ends.
    """
    if not lambdaN >= 0:
        raise InvalidInput(f"lambda must be >= 0, not {lambdaN!r}")
    lambdas = path.lambdas
    if lambdaN >= lambdas[0]:
        return 0
    if lambdaN <= lambdas[-1]:
        return int(lambdas.size - 1)
    distance = np.abs(np.log(lambdas) - _log(lambdaN))
    return int(np.argmin(distance))


def selectedSupport(
    path: SolutionPath, chosenLambda: float
) -> tuple[Lag, ...]:
    """
    The lags whose coefficients are nonzero at the knot of C{path} nearest
    to C{chosenLambda}.
    """
    if path.lambdas.size == 0:
        raise InvalidInput("cannot select from an empty path")
    row = path.coefficients[nearestKnot(path, chosenLambda)]
    return tuple(int(j) + 1 for j in np.flatnonzero(row))


@dataclass(frozen=True, eq=False)
class Levinson:
    """
    The output of the Levinson-Durbin recursion up to some maximum order
    C{m}.

    @ivar coefficients: The autoregressive coefficients of orders C{1..m}.
    @ivar reflections: The reflection coefficients, i.e. the partial
        autocorrelations at lags C{1..m}.
    @ivar variances: The innovation variances of orders C{0..m}.
    """

    coefficients: tuple[FloatArray, ...]
    reflections: FloatArray
    variances: FloatArray


def levinsonDurbin(gamma: npt.ArrayLike, maxOrder: int) -> Levinson:
    """
    Solve the Yule-Walker equations of every order up to C{maxOrder} for the
    autocovariances C{gamma(0..maxOrder)}.

    @raise DegenerateInput: if C{gamma(0)} is zero or the process turns out
        to be perfectly predictable before C{maxOrder}.
    """
    g = np.asarray(gamma, dtype=np.float64)
    if maxOrder < 0 or g.ndim != 1 or g.size <= maxOrder:
        raise InvalidInput(
            f"need autocovariances up to lag {maxOrder}, have {g.size}"
        )
    if not g[0] > 0:
        raise DegenerateInput("gamma(0) must be positive")
    phi = np.zeros(0)
    variance = float(g[0])
    coefficients: list[FloatArray] = []
    reflections = np.zeros(maxOrder)
    variances = np.zeros(maxOrder + 1)
    variances[0] = variance
    for k in range(1, maxOrder + 1):
        if not variance > 0:
            raise DegenerateInput(
                f"series is perfectly predictable at order {k - 1}"
            )
        reflection = (g[k] - phi @ g[k - 1 : 0 : -1]) / variance
        reflection = float(np.clip(reflection, -1.0, 1.0))
        phi = np.r_[phi - reflection * phi[::-1], reflection]
        variance *= 1.0 - reflection * reflection
        reflections[k - 1] = reflection
        variances[k] = variance
        frozen = phi.copy()
        frozen.setflags(write=False)
        coefficients.append(frozen)
    return Levinson(tuple(coefficients), reflections, variances)


def partialAutocorrelation(series: TimeSeries, maxLag: int) -> FloatArray:
    """
    Sample partial autocorrelations at lags C{1..maxLag}.
    """
    if maxLag < 1:
        raise InvalidInput(f"maxLag must be at least 1, not {maxLag}")
    gamma = sampleAutocovariance(series, maxLag)
    if gamma[0] == 0:
        raise DegenerateInput("constant series has no partial autocorrelation")
    return levinsonDurbin(gamma, maxLag).reflections


@dataclass(frozen=True, eq=False)
class YwFit:
    """
    Yule-Walker fits of every order with their AIC values.

    @ivar coefficientsByOrder: Coefficients of orders C{1..maxOrder}.
    @ivar aic: C{n log(sigma_k^2) + 2k} for orders C{k = 0..maxOrder}.
    @ivar chosenOrder: The AIC minimizer; the smaller order on ties.
    """

    coefficientsByOrder: tuple[FloatArray, ...]
    aic: FloatArray
    chosenOrder: int
    partialAutocorrelations: FloatArray
    innovationVariances: FloatArray

    @property
    def maxOrder(self) -> int:
        return len(self.coefficientsByOrder)

    @property
    def coefficients(self) -> FloatArray:
        """
        The coefficients at the chosen order (empty for order 0).
        """
        if self.chosenOrder == 0:
            return np.zeros(0)
        return self.coefficientsByOrder[self.chosenOrder - 1]

    def toJSON(self) -> JSONObject:
        return {
            "coefficients_by_order": [
                each.tolist() for each in self.coefficientsByOrder
            ],
            "aic": self.aic.tolist(),
            "chosen_order": self.chosenOrder,
            "partial_autocorrelations": self.partialAutocorrelations.tolist(),
            "innovation_variances": self.innovationVariances.tolist(),
        }

    @classmethod
    def fromJSON(cls, json: JSONObject) -> YwFit:
        try:
            return cls(
                tuple(
                    np.array(each, dtype=np.float64)
                    for each in json["coefficients_by_order"]
                ),
                np.array(json["aic"], dtype=np.float64),
                int(json["chosen_order"]),
                np.array(json["partial_autocorrelations"], dtype=np.float64),
                np.array(json["innovation_variances"], dtype=np.float64),
            )
        except KeyError as missing:
            raise InvalidInput(
                f"Yule-Walker JSON lacks field {missing}"
            ) from None


def yuleWalker(series: TimeSeries, maxOrder: int) -> YwFit:
    """
    Fit autoregressions of orders C{1..maxOrder} to the demeaned usable
    values of C{series} by the Levinson-Durbin recursion on the sample
    autocovariances, and choose the order by AIC.

    @raise DegenerateInput: for a constant series.
    """
    if not 1 <= maxOrder < series.n:
        raise InvalidInput(
            f"max_order must lie in [1, n - 1] = [1, {series.n - 1}], "
            f"not {maxOrder}"
        )
    gamma = sampleAutocovariance(series, maxOrder)
    if gamma[0] == 0:
        raise DegenerateInput("Yule-Walker fit of a constant series")
    recursion = levinsonDurbin(gamma, maxOrder)
    orders = np.arange(maxOrder + 1)
    with np.errstate(divide="ignore"):
        aic = series.n * np.log(recursion.variances) + 2.0 * orders
    chosen = int(np.argmin(aic))
    log.info(
        "Yule-Walker AIC chose order {order} of at most {maxOrder}",
        order=chosen,
        maxOrder=maxOrder,
    )
    return YwFit(
        recursion.coefficients,
        aic,
        chosen,
        recursion.reflections,
        recursion.variances,
    )


__all__ = [
    "CvResult",
    "Levinson",
    "YwFit",
    "crossValidate",
    "levinsonDurbin",
    "nearestKnot",
    "partialAutocorrelation",
    "refitAtChoice",
    "selectedSupport",
    "yuleWalker",
]
