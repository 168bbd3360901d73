import numpy as np
import pytest

from gfou.errors import (ComparisonViolation, ConfigurationError, DomainError, GfouError, InconclusiveError,
                         NumericalError, SpectralTruncationError, describe, exit_code_for, register_error_handlers)
from gfou.utils import config_hash, fmt, read_csv, read_matrix, write_csv, write_matrix


@pytest.mark.parametrize("exc, code", [
    (ConfigurationError("x"), 1),
    (DomainError("x"), 1),
    (ComparisonViolation("x"), 2),
    (InconclusiveError("x"), 3),
    (SpectralTruncationError("x"), 3),
    (NumericalError("x"), 4),
    (GfouError("x"), 4),
])
def test_exit_codes(exc, code):
    register_error_handlers()
    assert exit_code_for(exc) == code


def test_configuration_errors_are_value_errors():
    with pytest.raises(ValueError):
        raise DomainError("t <= 0")


def test_describe():
    assert describe(DomainError("t must be positive")) == "Domain Error: t must be positive"
    assert describe(ComparisonViolation()) == "Inequality Violated Beyond Budget"


def test_fmt_round_trips():
    rng = np.random.default_rng(0)
    for x in np.concatenate([rng.standard_normal(50) * 10.0 ** rng.integers(-300, 300, 50), [0.1, 1 / 3]]):
        assert float(fmt(x)) == x


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_csv_comments_and_rows(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["x", "y"], [(0.1, 2.0), (1e-300, -3.5)], ["config_hash: abc", "s: 0.5"])
    header, rows, comments = read_csv(path)
    assert header == ["x", "y"]
    assert comments == ["config_hash: abc", "s: 0.5"]
    assert [float(c) for c in rows[1]] == [1e-300, -3.5]
    assert not list(tmp_path.glob("*.tmp"))


def test_matrix_round_trip(tmp_path):
    m = np.random.default_rng(1).standard_normal((7, 3))
    write_matrix(tmp_path / "m.csv", ["a", "b", "c"], m)
    assert np.array_equal(read_matrix(tmp_path / "m.csv"), m)


def test_tables_are_plain_numeric_text(tmp_path):
    path = write_matrix(tmp_path / "t.csv", ["x", "y"], [[0.5, 1.0]], ["s: 0.5"])
    assert path.read_text(encoding="utf-8") == "# s: 0.5\nx,y\n0.5,1\n"


def test_empty_table_keeps_its_header(tmp_path):
    header, data, _ = read_csv(write_csv(tmp_path / "e.csv", ["a", "b"], []))
    assert header == ["a", "b"]
    assert data.shape == (0, 2)


def test_column_count_must_match_the_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2\n3,4\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="3-column header"):
        read_csv(path)


def test_malformed_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,x\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="malformed"):
        read_matrix(path)
