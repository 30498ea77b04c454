"""
Tests pour les utilitaires d'écriture des artefacts.
"""
from datetime import timedelta

import numpy as np
import pytest

from core.exceptions import DomainError
from utils.csv_utils import format_value, write_csv
from utils.date_utils import format_duration, from_iso, to_iso, utc_now
from utils.image_utils import read_image_csv, write_image_csv, write_pgm
from utils.json_utils import dumps, to_builtin


@pytest.mark.parametrize(
    "value, expected",
    [
        (True, "true"),
        (np.bool_(False), "false"),
        (0.1, "0.1"),
        (np.float64(1e-20), "1e-20"),
        (float("nan"), "nan"),
        (float("-inf"), "-inf"),
        (None, ""),
        (np.int64(7), "7"),
        ("reset", "reset"),
    ],
)
def test_format_value(value, expected):
    assert format_value(value) == expected


def test_write_csv_uses_lf_and_column_order(tmp_path, read_table):
    path = write_csv(tmp_path / "table.csv", ["a", "b"], [{"b": 2, "a": 1}, [3.5, None]])
    assert path.read_bytes() == b"a,b\n1,2\n3.5,\n"
    assert read_table(path) == [{"a": "1", "b": "2"}, {"a": "3.5", "b": ""}]


def test_json_is_sorted_and_strict():
    data = {"b": np.float64(1.0), "a": [np.int64(2), float("inf")]}
    assert to_builtin(data) == {"b": 1.0, "a": [2, None]}
    assert dumps(data) == '{\n  "a": [\n    2,\n    null\n  ],\n  "b": 1.0\n}\n'


def test_image_csv_round_trip(tmp_path):
    values = np.array([[0.0, 0.25, 1.0], [0.5, 1e-12, -3.0]])
    write_image_csv(tmp_path / "image.csv", values, spacing=0.5)
    restored, spacing = read_image_csv(tmp_path / "image.csv")
    assert np.array_equal(restored, values)
    assert spacing == 0.5


def test_one_dimensional_image_is_a_single_row(tmp_path):
    write_image_csv(tmp_path / "line.csv", [1.0, 2.0])
    restored, _ = read_image_csv(tmp_path / "line.csv")
    assert restored.shape == (1, 2)


def test_image_csv_bad_header(tmp_path):
    path = tmp_path / "image.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(DomainError):
        read_image_csv(path)


def test_pgm_header_and_levels(tmp_path):
    path = write_pgm(tmp_path / "image.pgm", [[0.0, 0.5, 1.0]])
    assert path.read_text(encoding="ascii").splitlines() == ["P2", "3 1", "255", "0 128 255"]


def test_pgm_constant_image(tmp_path):
    path = write_pgm(tmp_path / "flat.pgm", np.ones((2, 2)))
    assert path.read_text(encoding="ascii").splitlines()[3:] == ["0 0", "0 0"]


def test_dates_round_trip_and_duration():
    started = utc_now()
    assert from_iso(to_iso(started)) == started
    assert to_iso(None) is None
    later = started + timedelta(minutes=2, seconds=5)
    assert format_duration(started, later) == "2 min 05 s"
    assert format_duration(started, started + timedelta(seconds=3)) == "3 s"
    assert format_duration(started, None) == "N/A"
