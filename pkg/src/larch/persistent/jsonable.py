# -*- test-case-name: larch.test.test_persistent -*-
"""
Read and write L{JSONable} values as JSON files.

Files are written with sorted keys and a fixed indentation, so that equal
values always produce identical bytes.
"""

from __future__ import annotations

from json import JSONDecodeError
from json import dump as save_json
from json import load as load_json
from pathlib import Path
from typing import Type

from ..boundaries import InvalidInput, JSONable, JSONableSelf, JSONObject
from ..process import ArModel


def saveJSON(json: JSONObject, path: Path) -> Path:
    """
    Write C{json} to C{path}, replacing any existing file.

    @raise OSError: naming C{path} if it cannot be written.
    """
    try:
        with path.open("w") as wf:
            save_json(json, wf, indent=2, sort_keys=True, allow_nan=True)
            wf.write("\n")
    except OSError as error:
        raise OSError(f"cannot write {path}: {error.strerror}") from error
    return path


def loadJSON(path: Path) -> JSONObject:
    """
    Load a JSON object from C{path}.

    @raise InvalidInput: if the file is not a JSON object.
    """
    try:
        with path.open() as rf:
            loaded = load_json(rf)
    except OSError as error:
        raise OSError(f"cannot read {path}: {error.strerror}") from error
    except JSONDecodeError as error:
        raise InvalidInput(f"{path} is not valid JSON: {error}") from None
    if not isinstance(loaded, dict):
        raise InvalidInput(f"{path} must contain a JSON object")
    return loaded


def writeJSONable(value: JSONable, path: Path) -> Path:
    return saveJSON(value.toJSON(), path)


def readJSONable(kind: Type[JSONableSelf], path: Path) -> JSONableSelf:
    """
    Load an instance of C{kind} from C{path}; format errors name the file.
    """
    json = loadJSON(path)
    try:
        return kind.fromJSON(json)
    except InvalidInput as error:
        raise InvalidInput(f"{path}: {error}") from None


def readModel(path: Path) -> ArModel:
    return readJSONable(ArModel, path)


def writeModel(model: ArModel, path: Path) -> Path:
    return writeJSONable(model, path)


__all__ = [
    "loadJSON",
    "readJSONable",
    "readModel",
    "saveJSON",
    "writeJSONable",
    "writeModel",
]
