# -*- test-case-name: larch.test.test_cli -*-
"""
The C{larch} command: simulate series, fit and trace lasso autoregressions,
cross-validate, fit the Yule-Walker baseline, check the theory for an
instance, and run Monte-Carlo selection experiments.

Every subcommand is reproducible from its flags alone; all randomness flows
from C{--seed}.  Exit status is 0 on success, 2 when the input is invalid
and 1 when a computation fails.
"""

from __future__ import annotations

import sys
from argparse import ArgumentParser, Namespace
from math import ceil
from pathlib import Path
from typing import IO, Callable, NoReturn, Sequence

import numpy as np
from twisted.logger import (
    FilteringLogObserver,
    ILogObserver,
    LogLevel,
    LogLevelFilterPredicate,
    Logger,
    globalLogPublisher,
    jsonFileLogObserver,
    textFileLogObserver,
)

from .boundaries import (
    CvRule,
    CvScheme,
    DomainError,
    FloatArray,
    InvalidInput,
    ReplicationDriver,
)
from .design import LagDesign, buildDesign
from .drivers.parallel import JoblibDriver
from .drivers.serial import SerialDriver
from .experiments import McConfig, emitReport, paperModel, runMonteCarlo
from .lasso import PenaltyConfig, SolverSettings, fit, solutionPath
from .persistent.jsonable import (
    readJSONable,
    readModel,
    saveJSON,
    writeJSONable,
)
from .persistent.tables import readSeries, writeCv, writePath, writeSeries
from .process import ArModel, simulate
from .selection import crossValidate, refitAtChoice, yuleWalker
from .theory import conditionReport

log = Logger()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2


class UsageError(InvalidInput):
    """
    The command line itself was malformed.
    """


class _Parser(ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def positiveInteger(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError(text)
    return value


def _commonOptions(parser: ArgumentParser) -> None:
    parser.add_argument(
        "--out",
        type=Path,
        default=Path("."),
        help="directory for the output files (default: current directory)",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="log progress (-v) or solver details (-vv) to stderr",
    )
    parser.add_argument(
        "-q", "--quiet", action="store_true", help="log errors only"
    )
    parser.add_argument(
        "--log-json",
        type=Path,
        default=None,
        help="also write every log event as JSON to this file",
    )


def _seriesOptions(parser: ArgumentParser, needsLambda: bool = False) -> None:
    parser.add_argument(
        "--series", type=Path, required=True, help="series CSV (header x)"
    )
    parser.add_argument(
        "--p", type=positiveInteger, required=True, help="number of lags"
    )
    parser.add_argument(
        "--weights",
        default="unit",
        help='comma-separated per-lag weights, or "unit" (default)',
    )
    parser.add_argument(
        "--trim-presample",
        action="store_true",
        help="use the first p values as lags only, for data without "
        "pre-sample values",
    )
    if needsLambda:
        parser.add_argument(
            "--lambda",
            dest="lambdaN",
            type=float,
            required=True,
            help="the penalty level lambda_n",
        )


def _gridOptions(parser: ArgumentParser) -> None:
    defaults = SolverSettings()
    parser.add_argument(
        "--grid-size", type=positiveInteger, default=defaults.gridSize
    )
    parser.add_argument(
        "--lambda-min-ratio", type=float, default=defaults.lambdaMinRatio
    )


def makeParser() -> ArgumentParser:
    parser = _Parser(
        prog="larch",
        description="Sparse autoregression by the weighted lasso.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulateCommand = commands.add_parser(
        "simulate", help="simulate a series from an AR model"
    )
    simulateCommand.add_argument(
        "--model",
        type=Path,
        help="model JSON (default: the sparse AR(15) model)",
    )
    simulateCommand.add_argument("--n", type=positiveInteger, default=1000)
    simulateCommand.add_argument(
        "--p",
        type=int,
        default=None,
        help="pre-sample values to retain (default: the model order)",
    )
    simulateCommand.add_argument("--burn-in", type=int, default=None)
    simulateCommand.add_argument("--seed", type=int, default=0)

    fitCommand = commands.add_parser(
        "fit", help="fit the lasso at one penalty level"
    )
    _seriesOptions(fitCommand, needsLambda=True)

    pathCommand = commands.add_parser(
        "path", help="trace the solution path over a geometric grid"
    )
    _seriesOptions(pathCommand)
    _gridOptions(pathCommand)

    cvCommand = commands.add_parser(
        "cv", help="choose the penalty level by cross-validation"
    )
    _seriesOptions(cvCommand)
    _gridOptions(cvCommand)
    cvCommand.add_argument("--folds", type=int, default=10)
    cvCommand.add_argument("--seed", type=int, default=0)
    cvCommand.add_argument(
        "--rolling-cv",
        action="store_true",
        help="rolling-origin folds instead of random row folds",
    )
    cvCommand.add_argument(
        "--cv-rule",
        choices=[rule.value for rule in CvRule],
        default=CvRule.minimum.value,
        help="how to pick the penalty from the error curve",
    )

    ywCommand = commands.add_parser(
        "yw", help="Yule-Walker fits with AIC order selection"
    )
    ywCommand.add_argument("--series", type=Path, required=True)
    ywCommand.add_argument("--max-order", type=positiveInteger, default=30)

    checkCommand = commands.add_parser(
        "check", help="evaluate the theory's conditions for an instance"
    )
    checkCommand.add_argument("--model", type=Path)
    checkCommand.add_argument("--n", type=positiveInteger, default=1000)
    checkCommand.add_argument("--p", type=positiveInteger, default=None)
    checkCommand.add_argument(
        "--lambda",
        dest="lambdaN",
        type=float,
        default=None,
        help="penalty level (default: n^(-alpha exponent))",
    )
    checkCommand.add_argument("--alpha-exponent", type=float, default=0.45)
    checkCommand.add_argument("--weights", default="unit")
    checkCommand.add_argument("--rho", type=float, default=2.0)
    checkCommand.add_argument(
        "--l", dest="lowerModulus", type=float, default=0.5
    )
    checkCommand.add_argument(
        "--L", dest="upperModulus", type=float, default=2.0
    )

    mcCommand = commands.add_parser(
        "mc", help="run a Monte-Carlo selection experiment"
    )
    mcCommand.add_argument(
        "--config",
        type=Path,
        help="experiment JSON (default: the reference study)",
    )
    mcCommand.add_argument("--model", type=Path)
    mcCommand.add_argument("--n", type=positiveInteger)
    mcCommand.add_argument("--p", type=positiveInteger)
    mcCommand.add_argument("--replications", type=positiveInteger)
    mcCommand.add_argument("--folds", type=int)
    mcCommand.add_argument("--grid-size", type=positiveInteger)
    mcCommand.add_argument("--lambda-min-ratio", type=float)
    mcCommand.add_argument("--seed", type=int, help="the base seed")
    mcCommand.add_argument("--weights")
    mcCommand.add_argument("--max-order", type=positiveInteger)
    mcCommand.add_argument("--rolling-cv", action="store_true")
    mcCommand.add_argument(
        "--cv-rule", choices=[rule.value for rule in CvRule]
    )
    mcCommand.add_argument(
        "--jobs",
        type=int,
        default=1,
        help="worker processes; -1 for every core (default: 1)",
    )

    for each in commands.choices.values():
        _commonOptions(each)
    return parser


def parseWeights(text: str, p: int) -> FloatArray:
    """
    Interpret C{--weights}: C{unit} or C{p} comma-separated numbers.
    """
    if text == "unit":
        return np.ones(p)
    try:
        weights = np.array([float(each) for each in text.split(",")])
    except ValueError:
        raise InvalidInput(
            f"--weights must be 'unit' or numbers separated by commas, "
            f"not {text!r}"
        ) from None
    if weights.size != p:
        raise InvalidInput(f"--weights needs {p} values, got {weights.size}")
    return weights


def _design(options: Namespace) -> LagDesign:
    series = readSeries(options.series)
    return buildDesign(series, options.p, trim=options.trim_presample)


def _outputs(options: Namespace) -> Path:
    directory: Path = options.out
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _model(path: Path | None) -> ArModel:
    return paperModel() if path is None else readModel(path)


def _settings(options: Namespace) -> SolverSettings:
    return SolverSettings(
        gridSize=options.grid_size, lambdaMinRatio=options.lambda_min_ratio
    )


def runSimulate(options: Namespace, stdout: IO[str]) -> None:
    model = _model(options.model)
    series = simulate(
        model,
        options.n,
        pPresample=options.p,
        burnIn=options.burn_in,
        seed=options.seed,
    )
    written = writeSeries(series, _outputs(options) / "series.csv")
    stdout.write(
        f"simulated n={series.n} (+{series.pPresample} pre-sample) "
        f"with seed {options.seed}: {written[0]}\n"
    )


def runFit(options: Namespace, stdout: IO[str]) -> None:
    design = _design(options)
    weights = parseWeights(options.weights, design.p)
    result = fit(design, PenaltyConfig(options.lambdaN, weights))
    target = writeJSONable(result, _outputs(options) / "fit.json")
    stdout.write(f"support {list(result.support)}: {target}\n")


def runPath(options: Namespace, stdout: IO[str]) -> None:
    design = _design(options)
    weights = parseWeights(options.weights, design.p)
    path = solutionPath(design, weights, settings=_settings(options))
    target = writePath(path, _outputs(options) / "path.csv")
    stdout.write(f"entry order {list(path.entryOrder())}: {target}\n")


def runCv(options: Namespace, stdout: IO[str]) -> None:
    design = _design(options)
    weights = parseWeights(options.weights, design.p)
    settings = _settings(options)
    path = solutionPath(design, weights, settings=settings)
    cv = crossValidate(
        design,
        weights,
        path.lambdas,
        options.folds,
        options.seed,
        CvScheme.rolling if options.rolling_cv else CvScheme.rows,
        settings,
        CvRule(options.cv_rule),
    )
    chosen = refitAtChoice(design, weights, cv, settings)
    directory = _outputs(options)
    writeCv(cv, directory / "cv.csv")
    writeJSONable(chosen, directory / "cv_model.json")
    stdout.write(
        f"chosen lambda {cv.chosenLambda!r}, support "
        f"{list(chosen.support)}: {directory / 'cv.csv'}\n"
    )


def runYuleWalker(options: Namespace, stdout: IO[str]) -> None:
    series = readSeries(options.series)
    result = yuleWalker(series, options.max_order)
    target = writeJSONable(result, _outputs(options) / "yw.json")
    stdout.write(f"AIC order {result.chosenOrder}: {target}\n")


def runCheck(options: Namespace, stdout: IO[str]) -> None:
    model = _model(options.model)
    n = options.n
    p = options.p if options.p is not None else max(model.p, ceil(np.log(n)))
    lambdaN = (
        options.lambdaN
        if options.lambdaN is not None
        else float(n) ** -options.alpha_exponent
    )
    penalty = PenaltyConfig(lambdaN, parseWeights(options.weights, p))
    report = conditionReport(
        model,
        n,
        p,
        penalty,
        options.rho,
        options.lowerModulus,
        options.upperModulus,
    )
    saveJSON(report.toJSON(), _outputs(options) / "conditions.json")
    width = max(len(row.name) for row in report.rows)
    for row in report.rows:
        value = "-" if row.value is None else f"{row.value:.6g}"
        stdout.write(
            f"{row.name:<{width}}  {value:>12}  {row.verdict.value}\n"
        )


def _experiment(options: Namespace) -> McConfig:
    if options.config is None:
        config = McConfig.paper()
    else:
        config = readJSONable(McConfig, options.config)
    if options.model is not None:
        config = config.override(model=readModel(options.model))
    config = config.override(
        n=options.n,
        p=options.p,
        replications=options.replications,
        cvFolds=options.folds,
        gridSize=options.grid_size,
        lambdaMinRatio=options.lambda_min_ratio,
        baseSeed=options.seed,
        maxOrder=options.max_order,
        cvScheme=CvScheme.rolling if options.rolling_cv else None,
        cvRule=None if options.cv_rule is None else CvRule(options.cv_rule),
    )
    if options.weights is not None:
        config = config.override(
            weights=parseWeights(options.weights, config.p)
        )
    return config


def runMc(options: Namespace, stdout: IO[str]) -> None:
    config = _experiment(options)
    driver: ReplicationDriver = (
        SerialDriver() if options.jobs == 1 else JoblibDriver(options.jobs)
    )
    report = runMonteCarlo(config, driver)
    written = emitReport(report, _outputs(options))
    summary = report.summary
    stdout.write(
        f"{config.replications} replications, {report.failures} failed; "
        f"selected per run: mean {summary.mean:.2f}, sd {summary.sd:.2f}\n"
    )
    for each in written:
        stdout.write(f"{each}\n")


_COMMANDS: dict[str, Callable[[Namespace, IO[str]], None]] = {
    "simulate": runSimulate,
    "fit": runFit,
    "path": runPath,
    "cv": runCv,
    "yw": runYuleWalker,
    "check": runCheck,
    "mc": runMc,
}


def _observers(
    options: Namespace, stderr: IO[str], opened: list[IO[str]]
) -> list[ILogObserver]:
    if options.quiet:
        level = LogLevel.error
    elif options.verbose >= 2:
        level = LogLevel.debug
    elif options.verbose == 1:
        level = LogLevel.info
    else:
        level = LogLevel.warn
    observers: list[ILogObserver] = [
        FilteringLogObserver(
            textFileLogObserver(stderr),
            [LogLevelFilterPredicate(defaultLogLevel=level)],
        )
    ]
    if options.log_json is not None:
        events = options.log_json.open("w")
        opened.append(events)
        observers.append(jsonFileLogObserver(events))
    return observers


def dispatch(
    argv: Sequence[str],
    stdout: IO[str] | None = None,
    stderr: IO[str] | None = None,
) -> int:
    """
    Run the subcommand named by C{argv} and return the exit status.
    """
    out = sys.stdout if stdout is None else stdout
    err = sys.stderr if stderr is None else stderr
    try:
        options = makeParser().parse_args(list(argv))
    except UsageError as error:
        err.write(f"{error}\n")
        return EXIT_INVALID
    opened: list[IO[str]] = []
    try:
        observers = _observers(options, err, opened)
    except OSError as error:
        err.write(f"cannot open --log-json file: {error}\n")
        return EXIT_FAILURE
    for observer in observers:
        globalLogPublisher.addObserver(observer)
    try:
        _COMMANDS[options.command](options, out)
    except (InvalidInput, DomainError) as error:
        log.error("invalid input: {error}", error=error)
        return EXIT_INVALID
    except Exception:
        log.failure("larch {command} failed", command=options.command)
        return EXIT_FAILURE
    finally:
        for observer in observers:
            globalLogPublisher.removeObserver(observer)
        for each in opened:
            each.close()
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


__all__ = ["dispatch", "main", "makeParser", "parseWeights"]
