"""
💾 Persistence
JSON codecs and file helpers for systems, controls, targets and paths

Complex matrices are stored as nested ``[re, im]`` pairs. Every file written
carries the ``schema`` field and is emitted with sorted keys so that runs with a
fixed seed produce byte-identical output.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np

from config.app_config import SCHEMA_VERSION

from .errors import FormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def matrix_to_json(a: np.ndarray) -> List[List[List[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a)]


def matrix_from_json(rows: Sequence[Sequence[Sequence[float]]]) -> np.ndarray:
    try:
        return np.array([[complex(float(re), float(im)) for re, im in row] for row in rows], dtype=complex)
    except (TypeError, ValueError) as e:
        raise FormatError(f"matrix entries must be [re, im] pairs: {e}") from e


def read_json(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise FormatError(f"file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON in {path}: {e}") from e
    if not isinstance(data, dict):
        raise FormatError(f"{path} must contain a JSON object")
    schema = data.get("schema")
    if schema is not None and schema != SCHEMA_VERSION:
        raise FormatError(f"{path} has schema {schema!r}, expected {SCHEMA_VERSION!r}")
    return data


def dumps(data: Dict[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=False)


def write_json(path: PathLike, data: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data) + "\n", encoding="utf-8")
    logger.debug(f"wrote {path}")
    return path


def target_to_dict(w: np.ndarray) -> Dict[str, Any]:
    return {"schema": SCHEMA_VERSION, "N": int(w.shape[0]), "unitary": matrix_to_json(w)}


def target_from_dict(data: Dict[str, Any]) -> np.ndarray:
    try:
        w = matrix_from_json(data["unitary"])
    except KeyError as e:
        raise FormatError("target file needs a 'unitary' entry") from e
    n = w.shape[0]
    if w.shape != (n, n) or np.max(np.abs(w.conj().T @ w - np.eye(n))) > 1e-9:
        raise FormatError("target must be a unitary matrix")
    return w
