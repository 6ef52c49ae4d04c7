# -*- test-case-name: larch.test.test_lasso -*-
"""
Weighted-M{l1} penalized least squares for lagged designs::

    (1/2n) |y - X phi|^2 + lambda_n sum_j lambda_(n,j) |phi_j|

solved by cyclic coordinate descent, certified by the KKT conditions, and
traced along warm-started solution paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import copysign, isfinite
from typing import Iterator, Sequence

import numpy as np
import numpy.typing as npt
from twisted.logger import Logger

from .boundaries import (
    FloatArray,
    IntArray,
    InvalidInput,
    JSONObject,
    Lag,
    NonConvergence,
    UnboundedPath,
)
from .design import LagDesign, gram

log = Logger()


@dataclass(frozen=True)
class SolverSettings:
    """
    Tuning of the coordinate-descent solver and of the default path grid.

    @ivar tol: Both the largest coefficient change of a converged sweep and
        the largest admissible KKT residual.
    @ivar maxIter: Maximum number of sweeps per fit.
    @ivar gridSize: Number of penalty levels on a solution path.
    @ivar lambdaMinRatio: Smallest path penalty as a fraction of
        L{lambdaMax}.
    """

    tol: float = 1e-8
    maxIter: int = 100_000
    gridSize: int = 100
    lambdaMinRatio: float = 1e-3

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise InvalidInput(f"tol must be positive, not {self.tol!r}")
        if self.maxIter < 1:
            raise InvalidInput(f"max_iter must be >= 1, not {self.maxIter}")
        if self.gridSize < 2:
            raise InvalidInput(
                f"grid size must be >= 2, not {self.gridSize}"
            )
        if not 0 < self.lambdaMinRatio < 1:
            raise InvalidInput(
                "lambda_min_ratio must lie in (0, 1), not "
                f"{self.lambdaMinRatio!r}"
            )


DEFAULT_SETTINGS = SolverSettings()


def _weightVector(weights: npt.ArrayLike, p: int | None = None) -> FloatArray:
    vector = np.array(weights, dtype=np.float64)
    if vector.ndim != 1:
        raise InvalidInput("weights must be a vector")
    if p is not None and vector.size != p:
        raise InvalidInput(f"expected {p} weights, got {vector.size}")
    if not (np.all(np.isfinite(vector)) and np.all(vector >= 0)):
        raise InvalidInput("weights must be finite and nonnegative")
    vector.setflags(write=False)
    return vector


@dataclass(frozen=True, eq=False)
class PenaltyConfig:
    """
    The grand tuning parameter C{lambda_n} and the per-lag weights
    C{lambda_(n,j)}.
    """

    lambdaN: float
    weights: FloatArray

    def __post_init__(self) -> None:
        if not (isfinite(self.lambdaN) and self.lambdaN >= 0):
            raise InvalidInput(
                f"lambda must be finite and >= 0, not {self.lambdaN!r}"
            )
        object.__setattr__(self, "weights", _weightVector(self.weights))

    @classmethod
    def unit(cls, p: int, lambdaN: float) -> PenaltyConfig:
        """
        Penalize every lag equally.
        """
        return cls(lambdaN, np.ones(p))

    @property
    def p(self) -> int:
        return int(self.weights.size)

    @property
    def thresholds(self) -> FloatArray:
        """
        The effective per-lag penalties C{lambda_n lambda_(n,j)}.

        Only these products reach the solver, so scaling C{lambda_n} by C{c}
        and the weights by C{1 / c} gives bit-identical fits when C{c} is a
        power of two; for other C{c} the products may differ in the last
        bit.
        """
        product: FloatArray = self.lambdaN * self.weights
        return product


def monotoneWeights(
    p: int, first: float = 1.0, last: float = 2.0
) -> FloatArray:
    """
    A geometric ladder of weights increasing from C{first} at lag 1 to
    C{last} at lag C{p}, penalizing distant lags more.
    """
    if p < 1 or not 0 < first <= last:
        raise InvalidInput("need p >= 1 and 0 < first <= last")
    return np.geomspace(first, last, p)


@dataclass(frozen=True, eq=False)
class LassoFit:
    """
    A certified minimizer of the penalized objective.

    @ivar support: The 1-based lags with nonzero coefficients.
    @ivar signs: C{sgn} of each coefficient.
    @ivar iterations: Coordinate-descent sweeps spent.
    """

    coefficients: FloatArray
    lambdaN: float
    objective: float
    kktResidual: float
    iterations: int
    support: tuple[Lag, ...] = field(init=False)
    signs: IntArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        coefficients = np.array(self.coefficients, dtype=np.float64)
        coefficients[coefficients == 0] = 0.0
        coefficients.setflags(write=False)
        signs = np.sign(coefficients).astype(np.int64)
        signs.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(
            self,
            "support",
            tuple(int(j) + 1 for j in np.flatnonzero(coefficients)),
        )

    def toJSON(self) -> JSONObject:
        return {
            "phi": self.coefficients.tolist(),
            "support": list(self.support),
            "lambda": self.lambdaN,
            "kkt_residual": self.kktResidual,
            "objective": self.objective,
        }

    @classmethod
    def fromJSON(cls, json: JSONObject) -> LassoFit:
        try:
            return cls(
                np.array(json["phi"], dtype=np.float64),
                float(json["lambda"]),
                float(json["objective"]),
                float(json["kkt_residual"]),
                0,
            )
        except KeyError as missing:
            raise InvalidInput(f"fit JSON lacks field {missing}") from None


def _checkShapes(phi: FloatArray, design: LagDesign, p: int) -> None:
    if phi.shape != (design.p,) or p != design.p:
        raise InvalidInput(
            f"coefficients {phi.shape} and penalty ({p} weights) must match "
            f"p = {design.p}"
        )


def objective(
    phi: npt.ArrayLike, design: LagDesign, penalty: PenaltyConfig
) -> float:
    """
    Evaluate the penalized objective at C{phi}.
    """
    coefficients = np.asarray(phi, dtype=np.float64)
    _checkShapes(coefficients, design, penalty.p)
    residual = design.y - design.X @ coefficients
    return float(
        residual @ residual / (2 * design.n)
        + penalty.thresholds @ np.abs(coefficients)
    )


def softThreshold(z: float, t: float) -> float:
    """
    The proximal map of C{t |.|}: C{sgn(z) max(|z| - t, 0)}.
    """
    if not t >= 0:
        raise InvalidInput(f"threshold must be >= 0, not {t!r}")
    return copysign(max(abs(z) - t, 0.0), z) if abs(z) > t else 0.0


def _kkt(
    gradient: FloatArray, phi: FloatArray, thresholds: FloatArray
) -> float:
    if phi.size == 0:
        return 0.0
    violation = np.where(
        phi != 0,
        np.abs(gradient + thresholds * np.sign(phi)),
        np.maximum(0.0, np.abs(gradient) - thresholds),
    )
    return float(violation.max())


def kktResidual(
    phi: npt.ArrayLike, design: LagDesign, penalty: PenaltyConfig
) -> float:
    """
    Verify optimality independently of the solver: the largest violation of
    the subgradient equation C{(1/n) X'(X phi - y) + lambda_n xi = 0}
    computed from C{X} and C{y} directly.
    """
    coefficients = np.asarray(phi, dtype=np.float64)
    _checkShapes(coefficients, design, penalty.p)
    gradient = design.X.T @ (design.X @ coefficients - design.y) / design.n
    return _kkt(gradient, coefficients, penalty.thresholds)


@dataclass(frozen=True, eq=False)
class _Moments:
    """
    The sufficient statistics C{X'X / n} and C{X'y / n} of a design, shared
    by all the fits of a path.
    """

    gram: FloatArray
    correlation: FloatArray

    @classmethod
    def of(cls, design: LagDesign) -> _Moments:
        return cls(gram(design), design.X.T @ design.y / design.n)


def _sweep(
    moments: _Moments,
    diagonal: FloatArray,
    thresholds: FloatArray,
    phi: FloatArray,
    gradient: FloatArray,
    order: Sequence[int] | IntArray,
) -> float:
    """
    Minimize exactly along each coordinate in C{order}, updating C{phi} and
    C{gradient} in place; return the largest coefficient change.
    """
    largest = 0.0
    rows = moments.gram
    for j in order:
        curvature = diagonal[j]
        if curvature <= 0.0:
            continue
        old = phi[j]
        if old == 0.0 and abs(gradient[j]) <= thresholds[j]:
            continue
        z = old - gradient[j] / curvature
        t = thresholds[j] / curvature
        new = z if t == 0.0 else softThreshold(z, t)
        if new != old:
            delta = new - old
            phi[j] = new
            gradient += delta * rows[j]
            largest = max(largest, abs(delta))
    return largest


def _fitMoments(
    moments: _Moments,
    design: LagDesign,
    penalty: PenaltyConfig,
    tol: float,
    maxIter: int,
    start: FloatArray | None,
) -> LassoFit:
    p = design.p
    phi = np.zeros(p) if start is None else np.array(start, dtype=np.float64)
    _checkShapes(phi, design, penalty.p)
    thresholds = penalty.thresholds
    diagonal = np.diag(moments.gram).copy()
    everything = np.arange(p)
    gradient = moments.gram @ phi - moments.correlation
    sweeps = 0
    kkt = _kkt(gradient, phi, thresholds)
    lowest = (kkt, phi.copy(), sweeps)
    while sweeps < maxIter:
        change = _sweep(
            moments, diagonal, thresholds, phi, gradient, everything
        )
        sweeps += 1
        gradient = moments.gram @ phi - moments.correlation
        kkt = _kkt(gradient, phi, thresholds)
        if change < tol and kkt < tol:
            log.debug(
                "coordinate descent converged at lambda={lambdaN} after "
                "{sweeps} sweeps (kkt residual {kkt})",
                lambdaN=penalty.lambdaN,
                sweeps=sweeps,
                kkt=kkt,
            )
            return LassoFit(
                phi,
                penalty.lambdaN,
                objective(phi, design, penalty),
                kkt,
                sweeps,
            )
        if kkt < lowest[0]:
            lowest = (kkt, phi.copy(), sweeps)
        active = np.flatnonzero(phi)
        while active.size and sweeps < maxIter:
            change = _sweep(
                moments, diagonal, thresholds, phi, gradient, active
            )
            sweeps += 1
            if change < tol:
                break
        gradient = moments.gram @ phi - moments.correlation
    kkt = _kkt(gradient, phi, thresholds)
    if kkt < lowest[0]:
        lowest = (kkt, phi, sweeps)
    kkt, phi, sweeps = lowest
    best = LassoFit(
        phi, penalty.lambdaN, objective(phi, design, penalty), kkt, sweeps
    )
    raise NonConvergence(
        f"coordinate descent did not converge in {maxIter} sweeps at "
        f"lambda = {penalty.lambdaN!r} (best kkt residual {kkt:.3g})",
        best,
        kkt,
    )


def fit(
    design: LagDesign,
    penalty: PenaltyConfig,
    tol: float = DEFAULT_SETTINGS.tol,
    maxIter: int = DEFAULT_SETTINGS.maxIter,
    start: npt.ArrayLike | None = None,
) -> LassoFit:
    """
    Minimize the penalized objective by cyclic coordinate descent, starting
    from C{start} (the zero vector by default).

    A fit is returned only once a full sweep changes no coefficient by
    C{tol} or more I{and} the KKT residual is below C{tol}.  Between full
    sweeps the solver cycles over the currently nonzero coefficients only.

    @raise NonConvergence: after C{maxIter} sweeps, carrying the iterate with
        the smallest KKT residual the solver evaluated.
    """
    if not tol > 0 or maxIter < 1:
        raise InvalidInput("need tol > 0 and max_iter >= 1")
    initial = None if start is None else np.asarray(start, dtype=np.float64)
    return _fitMoments(
        _Moments.of(design), design, penalty, tol, maxIter, initial
    )


def lambdaMax(design: LagDesign, weights: npt.ArrayLike) -> float:
    """
    The smallest C{lambda_n} whose solution is identically zero:
    C{max_j |X_j'y / n| / lambda_(n,j)} over the penalized lags.

    @raise UnboundedPath: if an unpenalized lag is correlated with C{y}.
    """
    vector = _weightVector(weights, design.p)
    correlation = np.abs(design.X.T @ design.y) / design.n
    penalized = vector > 0
    free = np.flatnonzero(~penalized & (correlation != 0))
    if free.size:
        raise UnboundedPath(
            f"lags {[int(j) + 1 for j in free]} have zero weight but are "
            "correlated with y; no penalty zeroes them"
        )
    if not penalized.any():
        return 0.0
    weighted, scaled = vector[penalized], correlation[penalized]
    value = float(np.max(scaled / weighted))
    # smallest float whose thresholds cover every correlation
    while np.any(value * weighted < scaled):
        value = float(np.nextafter(value, np.inf))
    return value


def lambdaGrid(
    lambdaMaximum: float, gridSize: int, lambdaMinRatio: float
) -> FloatArray:
    """
    A geometric grid from C{lambdaMaximum} down to C{lambdaMinRatio} times
    it; a single zero when C{lambdaMaximum} is zero.
    """
    if lambdaMaximum == 0:
        return np.zeros(1)
    return np.geomspace(
        lambdaMaximum, lambdaMaximum * lambdaMinRatio, gridSize
    )


@dataclass(frozen=True)
class PathEvent:
    """
    A lag entering or leaving the active set at a knot of a path.
    """

    lag: Lag
    lambdaN: float
    gridIndex: int


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """
    Fitted coefficients at a strictly decreasing sequence of penalty levels.

    @ivar lambdas: The penalty levels of the knots.
    @ivar coefficients: One row of coefficients per knot.
    @ivar entryEvents: The first activation of each lag, in order of entry;
        lags entering at the same knot are ordered by lag.
    @ivar exitEvents: Every deactivation, in path order.
    """

    lambdas: FloatArray
    coefficients: FloatArray
    entryEvents: tuple[PathEvent, ...]
    exitEvents: tuple[PathEvent, ...]

    def __post_init__(self) -> None:
        if self.lambdas.size == 0:
            raise InvalidInput("a solution path needs at least one knot")
        if np.any(np.diff(self.lambdas) >= 0):
            raise InvalidInput("path knots must strictly decrease")

    @property
    def p(self) -> int:
        return int(self.coefficients.shape[1])

    @property
    def knots(self) -> Iterator[tuple[float, FloatArray]]:
        """
        C{(lambda, coefficients)} pairs in path order.
        """
        for lam, row in zip(self.lambdas, self.coefficients):
            yield float(lam), row

    def entryOrder(self) -> tuple[Lag, ...]:
        return tuple(event.lag for event in self.entryEvents)

    def entryRanks(self) -> dict[Lag, int | None]:
        """
        The 1-based rank at which each lag first entered, or C{None} for lags
        that never did.
        """
        ranks: dict[Lag, int | None] = {
            lag: None for lag in range(1, self.p + 1)
        }
        for rank, lag in enumerate(self.entryOrder(), start=1):
            ranks[lag] = rank
        return ranks


def _events(
    lambdas: FloatArray, coefficients: FloatArray
) -> tuple[tuple[PathEvent, ...], tuple[PathEvent, ...]]:
    entries: list[PathEvent] = []
    exits: list[PathEvent] = []
    entered: set[Lag] = set()
    previous = np.zeros(coefficients.shape[1], dtype=bool)
    for index, (lam, row) in enumerate(zip(lambdas, coefficients)):
        current = row != 0
        for j in np.flatnonzero(current & ~previous):
            lag = int(j) + 1
            if lag not in entered:
                entered.add(lag)
                entries.append(PathEvent(lag, float(lam), index))
        for j in np.flatnonzero(previous & ~current):
            exits.append(PathEvent(int(j) + 1, float(lam), index))
        previous = current
    return tuple(entries), tuple(exits)


def pathOnGrid(
    design: LagDesign,
    weights: npt.ArrayLike,
    grid: npt.ArrayLike,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> SolutionPath:
    """
    Fit every penalty level of a strictly decreasing C{grid}, warm-starting
    each fit from the previous one.

    @raise NonConvergence: with C{gridIndex} set to the failing knot.
    """
    lambdas = np.array(grid, dtype=np.float64)
    if lambdas.ndim != 1 or lambdas.size == 0 or np.any(lambdas < 0):
        raise InvalidInput("grid must be a non-empty vector of lambdas >= 0")
    vector = _weightVector(weights, design.p)
    moments = _Moments.of(design)
    rows = np.zeros((lambdas.size, design.p))
    phi: FloatArray | None = None
    for index, lam in enumerate(lambdas):
        try:
            result = _fitMoments(
                moments,
                design,
                PenaltyConfig(float(lam), vector),
                settings.tol,
                settings.maxIter,
                phi,
            )
        except NonConvergence as failure:
            failure.gridIndex = index
            raise
        phi = np.array(result.coefficients)
        rows[index] = result.coefficients
    rows.setflags(write=False)
    lambdas.setflags(write=False)
    entries, exits = _events(lambdas, rows)
    return SolutionPath(lambdas, rows, entries, exits)


def solutionPath(
    design: LagDesign,
    weights: npt.ArrayLike,
    gridSize: int | None = None,
    lambdaMinRatio: float | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> SolutionPath:
    """
    The path over a geometric grid from L{lambdaMax} down to
    C{lambdaMinRatio * lambdaMax}, with C{gridSize} knots; both default to
    C{settings}.
    """
    size = settings.gridSize if gridSize is None else gridSize
    ratio = (
        settings.lambdaMinRatio if lambdaMinRatio is None else lambdaMinRatio
    )
    SolverSettings(settings.tol, settings.maxIter, size, ratio)
    grid = lambdaGrid(lambdaMax(design, weights), size, ratio)
    path = pathOnGrid(design, weights, grid, settings)
    log.info(
        "solution path over {knots} knots from lambda={top}; entry order "
        "{order}",
        knots=grid.size,
        top=float(grid[0]),
        order=list(path.entryOrder()),
    )
    return path


__all__ = [
    "DEFAULT_SETTINGS",
    "LassoFit",
    "PathEvent",
    "PenaltyConfig",
    "SolutionPath",
    "SolverSettings",
    "fit",
    "kktResidual",
    "lambdaGrid",
    "lambdaMax",
    "monotoneWeights",
    "objective",
    "pathOnGrid",
    "softThreshold",
]
