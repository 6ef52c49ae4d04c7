# -*- test-case-name: larch.test.test_persistent -*-
"""
CSV files: series with their metadata sidecars, solution paths,
cross-validation curves and the tables of experiment reports.

Every table is written with a header row through L{csv}, so the files are
RFC 4180 and ready for any plotting tool.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..boundaries import InvalidInput
from ..lasso import SolutionPath
from ..process import TimeSeries
from ..selection import CvResult
from .jsonable import loadJSON, saveJSON

Cell = str | int | float


def writeTable(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[Cell]]
) -> Path:
    """
    Write C{header} and C{rows} to C{path}, replacing any existing file.
    """
    try:
        with path.open("w", newline="") as wf:
            writer = csv.writer(wf, lineterminator="\r\n")
            writer.writerow(header)
            writer.writerows(
                [
                    repr(cell) if isinstance(cell, float) else cell
                    for cell in row
                ]
                for row in rows
            )
    except OSError as error:
        raise OSError(f"cannot write {path}: {error.strerror}") from error
    return path


def readTable(path: Path) -> tuple[list[str], list[list[str]]]:
    """
    Read a CSV file with a header row.
    """
    try:
        with path.open(newline="") as rf:
            lines = list(csv.reader(rf))
    except OSError as error:
        raise OSError(f"cannot read {path}: {error.strerror}") from error
    if not lines:
        raise InvalidInput(f"{path} is empty; expected a header row")
    return lines[0], lines[1:]


def metadataPath(path: Path) -> Path:
    """
    The sidecar of a series file: C{series.csv} goes with
    C{series.meta.json}.
    """
    return path.with_name(path.stem + ".meta.json")


def writeSeries(series: TimeSeries, path: Path) -> list[Path]:
    """
    Write all the values of C{series}, pre-sample ones included, under the
    header C{x}, and its C{n}, C{p_presample} and C{seed} to the sidecar.
    """
    written = writeTable(path, ["x"], ([float(x)] for x in series.values))
    sidecar = saveJSON(
        {"n": series.n, "p_presample": series.pPresample, "seed": series.seed},
        metadataPath(path),
    )
    return [written, sidecar]


def readSeries(path: Path) -> TimeSeries:
    """
    Read a single-column series.  Without a sidecar, every value is usable
    data and nothing is pre-sample.

    @raise InvalidInput: naming the file and row of a malformed value.
    """
    header, rows = readTable(path)
    if header != ["x"]:
        raise InvalidInput(f'{path}: expected the single header "x"')
    values = []
    for number, row in enumerate(rows, start=2):
        if len(row) != 1:
            raise InvalidInput(f"{path}, line {number}: expected one value")
        try:
            values.append(float(row[0]))
        except ValueError:
            raise InvalidInput(
                f"{path}, line {number}: {row[0]!r} is not a number"
            ) from None
    sidecar = metadataPath(path)
    if not sidecar.exists():
        return TimeSeries(np.array(values), len(values))
    meta = loadJSON(sidecar)
    try:
        n, pPresample, seed = meta["n"], meta["p_presample"], meta["seed"]
    except KeyError as missing:
        raise InvalidInput(f"{sidecar} lacks field {missing}") from None
    try:
        return TimeSeries(np.array(values), int(n), int(pPresample), seed)
    except InvalidInput as error:
        raise InvalidInput(f"{path}: {error}") from None


def writePath(solution: SolutionPath, path: Path) -> Path:
    """
    One row per knot: C{lambda, lag_1, ..., lag_p}.
    """
    header = ["lambda"] + [f"lag_{j}" for j in range(1, solution.p + 1)]
    return writeTable(
        path,
        header,
        (
            [lam] + [float(each) for each in row]
            for lam, row in solution.knots
        ),
    )


def writeCv(cv: CvResult, path: Path) -> Path:
    return writeTable(
        path,
        ["lambda", "cv_mean", "cv_se"],
        (
            [float(lam), float(mean), float(se)]
            for lam, mean, se in zip(cv.lambdaGrid, cv.cvMean, cv.cvSE)
        ),
    )


__all__ = [
    "metadataPath",
    "readSeries",
    "readTable",
    "writeCv",
    "writePath",
    "writeSeries",
    "writeTable",
]
