import json

import numpy as np
import pytest

from control_engine.errors import FormatError
from control_engine.persistence import (
    dumps,
    matrix_from_json,
    matrix_to_json,
    read_json,
    target_from_dict,
    target_to_dict,
    write_json,
)
from control_engine.su_algebra import PAULI_Y, random_su


def test_matrix_encoding():
    assert matrix_to_json(PAULI_Y) == [[[0.0, 0.0], [0.0, -1.0]], [[0.0, 1.0], [0.0, 0.0]]]
    np.testing.assert_array_equal(matrix_from_json(matrix_to_json(PAULI_Y)), PAULI_Y)
    with pytest.raises(FormatError):
        matrix_from_json([[["a", 0.0]]])


def test_write_and_read(tmp_path):
    path = write_json(tmp_path / "nested" / "report.json", {"b": 1, "a": [1.5]})
    assert read_json(path) == {"a": [1.5], "b": 1}
    assert path.read_text().index('"a"') < path.read_text().index('"b"')


def test_read_errors(tmp_path):
    with pytest.raises(FormatError):
        read_json(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(FormatError):
        read_json(bad)
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"schema": "something/9"}))
    with pytest.raises(FormatError):
        read_json(other)
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]")
    with pytest.raises(FormatError):
        read_json(listed)


def test_targets(rng):
    w = random_su(2, rng)
    np.testing.assert_allclose(target_from_dict(target_to_dict(w)), w)
    with pytest.raises(FormatError):
        target_from_dict({"unitary": matrix_to_json(2 * np.eye(2))})
    with pytest.raises(FormatError):
        target_from_dict({})


def test_dumps_rejects_nan():
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})
