# -*- test-case-name: larch.test.test_experiments -*-
"""
Monte-Carlo selection experiments: simulate many series from a sparse
autoregression, select lags on each by a cross-validated lasso path, compare
with the Yule-Walker/AIC order, and tabulate how often each lag is found.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path
from statistics import median
from typing import Any, Iterable, Sequence

import numpy as np
from twisted.logger import Logger

from .boundaries import (
    CvRule,
    CvScheme,
    DegenerateInput,
    ExperimentFailure,
    FloatArray,
    InvalidInput,
    JSONObject,
    Lag,
    NonConvergence,
    ReplicationDriver,
)
from .design import buildDesign, gramDeviation
from .drivers.serial import SerialDriver
from .lasso import PenaltyConfig, SolverSettings, fit, solutionPath
from .persistent.jsonable import saveJSON
from .persistent.tables import writeTable
from .process import ArModel, autocovariance, simulate, toeplitzGamma
from .selection import (
    crossValidate,
    nearestKnot,
    selectedSupport,
    yuleWalker,
)
from .theory import kappaP, predictionError, predictionErrorBound

log = Logger()

SCHEMA_VERSION = 1

FAILURE_TOLERANCE = 0.05
"""
The largest fraction of replications that may fail before an experiment is
abandoned.
"""

FIRST_ENTRANTS = 5
NEVER = "never"
"The entry rank recorded for a lag that never enters a solution path."


def paperModel() -> ArModel:
    """
    The sparse AR(15) model of the reference selection study::

        X_t = 0.2 X_(t-1) + 0.1 X_(t-3) + 0.2 X_(t-5) + 0.3 X_(t-10)
              + 0.1 X_(t-15) + Z_t,    sd(Z_t) = 0.1
    """
    phi = np.zeros(15)
    phi[[0, 2, 4, 9, 14]] = [0.2, 0.1, 0.2, 0.3, 0.1]
    return ArModel(phi, 0.1)


@dataclass(frozen=True, eq=False)
class McConfig:
    """
    The parameters of a Monte-Carlo experiment.  Replication C{i} uses the
    seed C{baseSeed + i}.

    @ivar weights: Per-lag penalty weights, or C{None} for unit weights.
    @ivar cvRule: How the penalty level is picked from the cross-validated
        error curve.
    @ivar maxOrder: The largest order tried by the Yule-Walker baseline.
    """

    model: ArModel
    n: int = 1000
    p: int = 50
    replications: int = 200
    cvFolds: int = 10
    gridSize: int = 100
    lambdaMinRatio: float = 1e-3
    baseSeed: int = 0
    weights: FloatArray | None = None
    cvScheme: CvScheme = CvScheme.rows
    maxOrder: int = 30
    cvRule: CvRule = CvRule.minimum

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise InvalidInput(
                f"replications must be >= 1, not {self.replications}"
            )
        if self.n < 1 or self.p < 1 or self.baseSeed < 0:
            raise InvalidInput("need n >= 1, p >= 1 and base_seed >= 0")
        if self.cvFolds < 2 or self.cvFolds > self.n:
            raise InvalidInput(
                f"cv_folds must lie in [2, n], not {self.cvFolds}"
            )
        if not 1 <= self.maxOrder < self.n:
            raise InvalidInput("max_order must lie in [1, n - 1]")
        self.model.coefficientsTo(self.p)
        self.settings  # validates grid size and ratio
        if self.weights is not None:
            weights = np.array(self.weights, dtype=np.float64)
            if weights.shape != (self.p,):
                raise InvalidInput(f"weight_scheme needs {self.p} weights")
            weights.setflags(write=False)
            object.__setattr__(self, "weights", weights)

    @classmethod
    def paper(cls, replications: int = 200) -> McConfig:
        """
        The reference study: the L{paperModel}, C{n = 1000} and C{p = 50},
        with the penalty picked by the one-standard-error rule.
        """
        return cls(
            paperModel(),
            replications=replications,
            cvRule=CvRule.oneStandardError,
        )

    @property
    def settings(self) -> SolverSettings:
        return SolverSettings(
            gridSize=self.gridSize, lambdaMinRatio=self.lambdaMinRatio
        )

    def weightVector(self) -> FloatArray:
        if self.weights is None:
            return np.ones(self.p)
        return self.weights

    def override(self, **changes: Any) -> McConfig:
        """
        A copy with the given fields replaced; C{None} values are ignored.
        """
        return replace(
            self,
            **{
                name: value
                for name, value in changes.items()
                if value is not None
            },
        )

    def toJSON(self) -> JSONObject:
        return {
            "model": self.model.toJSON(),
            "n": self.n,
            "p": self.p,
            "replications": self.replications,
            "cv_folds": self.cvFolds,
            "grid_size": self.gridSize,
            "lambda_min_ratio": self.lambdaMinRatio,
            "base_seed": self.baseSeed,
            "weight_scheme": (
                "unit" if self.weights is None else self.weights.tolist()
            ),
            "cv_scheme": self.cvScheme.value,
            "max_order": self.maxOrder,
            "cv_rule": self.cvRule.value,
        }

    @classmethod
    def fromJSON(cls, json: JSONObject) -> McConfig:
        """
        Load a configuration; every field but C{model} may be omitted.
        """
        if "model" not in json:
            raise InvalidInput('experiment config lacks field "model"')
        defaults = cls(paperModel())
        scheme = json.get("weight_scheme", "unit")
        if scheme != "unit" and not isinstance(scheme, list):
            raise InvalidInput(
                'config field "weight_scheme" must be "unit" or a list'
            )
        try:
            cvScheme = CvScheme(json.get("cv_scheme", "rows"))
        except ValueError:
            raise InvalidInput(
                'config field "cv_scheme" must be "rows" or "rolling"'
            ) from None
        try:
            cvRule = CvRule(json.get("cv_rule", defaults.cvRule.value))
        except ValueError:
            raise InvalidInput(
                'config field "cv_rule" must be "minimum" or "one-se"'
            ) from None

        def integer(key: str, default: int) -> int:
            value = json.get(key, default)
            if not isinstance(value, int) or isinstance(value, bool):
                raise InvalidInput(f'config field "{key}" must be an integer')
            return value

        ratio = json.get("lambda_min_ratio", defaults.lambdaMinRatio)
        if not isinstance(ratio, (int, float)):
            raise InvalidInput(
                'config field "lambda_min_ratio" must be a number'
            )
        return cls(
            ArModel.fromJSON(json["model"]),
            n=integer("n", defaults.n),
            p=integer("p", defaults.p),
            replications=integer("replications", defaults.replications),
            cvFolds=integer("cv_folds", defaults.cvFolds),
            gridSize=integer("grid_size", defaults.gridSize),
            lambdaMinRatio=float(ratio),
            baseSeed=integer("base_seed", defaults.baseSeed),
            weights=(
                None if scheme == "unit" else np.array(scheme, dtype=float)
            ),
            cvScheme=cvScheme,
            maxOrder=integer("max_order", defaults.maxOrder),
            cvRule=cvRule,
        )


@dataclass(frozen=True)
class ReplicationResult:
    """
    What one replication contributes to a L{McReport}.

    @ivar entryRanks: For lags C{1..p}, the rank at which the lag first
        entered the solution path, or C{None}.
    """

    index: int
    seed: int
    selected: tuple[Lag, ...] = ()
    entryRanks: tuple[int | None, ...] = ()
    ywOrder: int = 0
    signRecovered: bool = False
    failed: bool = False


def runReplication(config: McConfig, index: int) -> ReplicationResult:
    """
    Simulate series C{index} of C{config}, trace its lasso path, choose the
    penalty by cross-validation on the path's own grid, and fit the
    Yule-Walker baseline to the same observations the lag design is built
    from, pre-sample included.

    Solver failures and degenerate series are logged and reported as a
    failed result.
    """
    seed = config.baseSeed + index
    weights = config.weightVector()
    settings = config.settings
    try:
        series = simulate(
            config.model, config.n, pPresample=config.p, seed=seed
        )
        design = buildDesign(series, config.p)
        path = solutionPath(design, weights, settings=settings)
        cv = crossValidate(
            design,
            weights,
            path.lambdas,
            config.cvFolds,
            seed,
            config.cvScheme,
            settings,
            config.cvRule,
        )
        selected = selectedSupport(path, cv.chosenLambda)
        row = path.coefficients[nearestKnot(path, cv.chosenLambda)]
        order = yuleWalker(series.observed, config.maxOrder).chosenOrder
    except (NonConvergence, DegenerateInput):
        log.failure(
            "replication {index} (seed {seed}) failed", index=index, seed=seed
        )
        return ReplicationResult(index, seed, failed=True)
    truth = np.sign(config.model.coefficientsTo(config.p))
    ranks = path.entryRanks()
    result = ReplicationResult(
        index,
        seed,
        selected,
        tuple(ranks[lag] for lag in range(1, config.p + 1)),
        order,
        bool(np.array_equal(np.sign(row), truth)),
    )
    log.debug(
        "replication {index} selected {selected}; Yule-Walker order {order}",
        index=index,
        selected=list(result.selected),
        order=order,
    )
    return result


@dataclass(frozen=True)
class Summary:
    mean: float
    sd: float
    min: int
    median: float
    max: int

    @classmethod
    def of(cls, counts: Sequence[int]) -> Summary:
        if not counts:
            return cls(0.0, 0.0, 0, 0.0, 0)
        values = np.array(counts, dtype=np.float64)
        sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
        return cls(
            float(values.mean()),
            sd,
            int(min(counts)),
            float(median(counts)),
            int(max(counts)),
        )

    def toJSON(self) -> JSONObject:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "min": self.min,
            "median": self.median,
            "max": self.max,
        }


@dataclass(frozen=True)
class McReport:
    """
    The tabulated outcome of a Monte-Carlo experiment.

    Per-lag tuples have one entry per lag C{1..p}; per-replication tuples
    one entry per successful replication, in replication order.

    @ivar amongFirstFive: How often each lag was selected and was among the
        first five lags to enter the path.
    @ivar entryOrderHistogram: For each lag, how often it entered at each
        rank, keyed by the rank or by L{NEVER}.
    @ivar signRecoveries: How many replications recovered the sign of every
        coefficient at the cross-validated penalty.
    """

    config: JSONObject
    trueCoefficients: tuple[float, ...]
    selectedCount: tuple[int, ...]
    amongFirstFive: tuple[int, ...]
    firstEntrantCounts: tuple[int, ...]
    replicationIndices: tuple[int, ...]
    numSelected: tuple[int, ...]
    entryOrderHistogram: tuple[dict[str, int], ...]
    ywOrderHistogram: dict[int, int]
    signRecoveries: int
    failures: int
    summary: Summary

    @property
    def p(self) -> int:
        return len(self.selectedCount)

    def toJSON(self) -> JSONObject:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "true_coefficients": list(self.trueCoefficients),
            "selected_count_per_lag": list(self.selectedCount),
            "among_first_five_per_lag": list(self.amongFirstFive),
            "first_entrant_count_per_lag": list(self.firstEntrantCounts),
            "replication_indices": list(self.replicationIndices),
            "num_selected": list(self.numSelected),
            "entry_order_histogram": [
                dict(each) for each in self.entryOrderHistogram
            ],
            "yw_order_histogram": {
                str(order): count
                for order, count in sorted(self.ywOrderHistogram.items())
            },
            "sign_recoveries": self.signRecoveries,
            "failures": self.failures,
            "summary": self.summary.toJSON(),
        }


def _rankKey(rank: int | None) -> str:
    return NEVER if rank is None else str(rank)


def aggregate(
    config: McConfig, results: Iterable[ReplicationResult]
) -> McReport:
    """
    Count the outcomes of C{results}, which may arrive in any order.

    @raise ExperimentFailure: if more than L{FAILURE_TOLERANCE} of the
        replications failed.
    """
    ordered = sorted(results, key=lambda result: result.index)
    succeeded = [result for result in ordered if not result.failed]
    failures = len(ordered) - len(succeeded)
    if failures > FAILURE_TOLERANCE * config.replications:
        raise ExperimentFailure(
            f"{failures} of {config.replications} replications failed"
        )
    p = config.p
    selected = np.zeros(p, dtype=np.int64)
    firstFive = np.zeros(p, dtype=np.int64)
    firstEntrant = np.zeros(p, dtype=np.int64)
    histogram: list[dict[str, int]] = [{} for _ in range(p)]
    ywOrders: dict[int, int] = {}
    for result in succeeded:
        for lag in result.selected:
            selected[lag - 1] += 1
        for lag, rank in enumerate(result.entryRanks, start=1):
            key = _rankKey(rank)
            histogram[lag - 1][key] = histogram[lag - 1].get(key, 0) + 1
            if rank == 1:
                firstEntrant[lag - 1] += 1
            if rank is not None and rank <= FIRST_ENTRANTS:
                if lag in result.selected:
                    firstFive[lag - 1] += 1
        ywOrders[result.ywOrder] = ywOrders.get(result.ywOrder, 0) + 1
    counts = [len(result.selected) for result in succeeded]
    return McReport(
        config.toJSON(),
        tuple(float(each) for each in config.model.coefficientsTo(p)),
        tuple(int(each) for each in selected),
        tuple(int(each) for each in firstFive),
        tuple(int(each) for each in firstEntrant),
        tuple(result.index for result in succeeded),
        tuple(counts),
        tuple(
            dict(sorted(each.items(), key=lambda item: _rankOrder(item[0])))
            for each in histogram
        ),
        dict(sorted(ywOrders.items())),
        sum(result.signRecovered for result in succeeded),
        failures,
        Summary.of(counts),
    )


def _rankOrder(key: str) -> float:
    return float("inf") if key == NEVER else float(key)


def runMonteCarlo(
    config: McConfig, driver: ReplicationDriver | None = None
) -> McReport:
    """
    Run every replication of C{config} on C{driver} (in-process by
    default) and aggregate the results.
    """
    if driver is None:
        driver = SerialDriver()
    log.info(
        "running {replications} replications (n={n}, p={p}) on {driver}",
        replications=config.replications,
        n=config.n,
        p=config.p,
        driver=type(driver).__name__,
    )
    results = driver.map(
        partial(runReplication, config), range(config.replications)
    )
    report = aggregate(config, results)
    if report.failures:
        log.warn(
            "{failures} replications failed and were excluded",
            failures=report.failures,
        )
    log.info(
        "selected per lag: {counts}; mean number selected {mean}",
        counts=list(report.selectedCount),
        mean=report.summary.mean,
    )
    return report


def emitReport(report: McReport, directory: Path) -> list[Path]:
    """
    Write C{report.json}, C{table1.csv}, C{num_selected.csv},
    C{entry_order.csv} and C{yw_orders.csv} to C{directory}, creating it if
    needed and replacing existing files.

    @return: The written files.
    """
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as error:
        raise OSError(
            f"cannot create {directory}: {error.strerror}"
        ) from error
    return [
        saveJSON(report.toJSON(), directory / "report.json"),
        writeTable(
            directory / "table1.csv",
            ["lag", "value", "selected_count", "among_first_five"],
            (
                [lag, report.trueCoefficients[lag - 1], count, first]
                for lag, count, first in zip(
                    range(1, report.p + 1),
                    report.selectedCount,
                    report.amongFirstFive,
                )
            ),
        ),
        writeTable(
            directory / "num_selected.csv",
            ["replication", "num_selected"],
            zip(report.replicationIndices, report.numSelected),
        ),
        writeTable(
            directory / "entry_order.csv",
            ["lag", "rank", "count"],
            (
                [lag, rank, count]
                for lag, ranks in enumerate(report.entryOrderHistogram, 1)
                for rank, count in ranks.items()
            ),
        ),
        writeTable(
            directory / "yw_orders.csv",
            ["order", "count"],
            sorted(report.ywOrderHistogram.items()),
        ),
    ]


def _gramMaxDeviation(
    model: ArModel, p: int, gammaP: FloatArray, n: int, seed: int
) -> float:
    design = buildDesign(simulate(model, n, pPresample=p, seed=seed), p)
    return gramDeviation(design, gammaP).maxAbs


def gramConvergence(
    model: ArModel,
    p: int,
    sizes: Sequence[int],
    seeds: Sequence[int],
    driver: ReplicationDriver | None = None,
) -> dict[int, float]:
    """
    For each sample size, the median over C{seeds} of the largest entrywise
    distance between the sample Gram matrix and C{Gamma_p}.
    """
    if driver is None:
        driver = SerialDriver()
    gammaP = toeplitzGamma(autocovariance(model, p - 1), p)
    return {
        n: float(
            median(
                driver.map(
                    partial(_gramMaxDeviation, model, p, gammaP, n), seeds
                )
            )
        )
        for n in sizes
    }


def _unitFit(
    model: ArModel, n: int, p: int, lambdaN: float, seed: int
) -> FloatArray:
    design = buildDesign(simulate(model, n, pPresample=p, seed=seed), p)
    return fit(design, PenaltyConfig.unit(p, lambdaN)).coefficients


def _signRecovered(
    model: ArModel, n: int, p: int, lambdaN: float, seed: int
) -> bool:
    phi = _unitFit(model, n, p, lambdaN, seed)
    return bool(np.array_equal(np.sign(phi), np.sign(model.coefficientsTo(p))))


def signRecoveryRate(
    model: ArModel,
    n: int,
    p: int,
    lambdaExponent: float,
    replications: int,
    baseSeed: int = 0,
    driver: ReplicationDriver | None = None,
) -> float:
    """
    The fraction of C{replications} whose unit-weight lasso fit at
    C{lambda_n = n^(-lambdaExponent)} has exactly the true sign vector.
    """
    if replications < 1:
        raise InvalidInput(f"replications must be >= 1, not {replications}")
    if driver is None:
        driver = SerialDriver()
    lambdaN = float(n) ** -lambdaExponent
    recovered = driver.map(
        partial(_signRecovered, model, n, p, lambdaN),
        range(baseSeed, baseSeed + replications),
    )
    return sum(recovered) / replications


def _withinPredictionBound(
    model: ArModel,
    n: int,
    p: int,
    lambdaN: float,
    gammaP: FloatArray,
    bound: float,
    seed: int,
) -> bool:
    phi = _unitFit(model, n, p, lambdaN, seed)
    return predictionError(phi, model.coefficientsTo(p), gammaP) <= bound


def predictionBoundCoverage(
    model: ArModel,
    n: int,
    p: int,
    lambdaExponent: float,
    replications: int,
    baseSeed: int = 0,
    driver: ReplicationDriver | None = None,
) -> float:
    """
    The fraction of C{replications} whose unit-weight fit at C{lambda_n =
    n^(-lambdaExponent)} has prediction error C{||phi_hat - phi*||^2} in the
    C{Gamma_p} norm within L{predictionErrorBound} (with C{M = 1}).
    """
    if replications < 1:
        raise InvalidInput(f"replications must be >= 1, not {replications}")
    if driver is None:
        driver = SerialDriver()
    lambdaN = float(n) ** -lambdaExponent
    gammaP = toeplitzGamma(autocovariance(model, p - 1), p)
    s = len(model.support())
    bound = predictionErrorBound(lambdaN, s, kappaP(gammaP), 1.0)
    covered = driver.map(
        partial(_withinPredictionBound, model, n, p, lambdaN, gammaP, bound),
        range(baseSeed, baseSeed + replications),
    )
    return sum(covered) / replications


__all__ = [
    "McConfig",
    "McReport",
    "ReplicationResult",
    "Summary",
    "aggregate",
    "emitReport",
    "gramConvergence",
    "paperModel",
    "predictionBoundCoverage",
    "runMonteCarlo",
    "runReplication",
    "signRecoveryRate",
]
