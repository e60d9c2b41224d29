import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nashlab import io as spec_io
from nashlab.game import g_disc, g_one, generate_random_episodic, lift_tabular_to_linear
from nashlab.solver import solve_episodic


def test_round_trip_g_one(tmp_path, g1):
    path = tmp_path / "g.json"
    spec_io.write_spec(g1, path)
    assert spec_io.read_spec(path) == g1


def test_round_trip_other_kinds(tmp_path):
    for spec in (g_disc(0.9), lift_tabular_to_linear(generate_random_episodic(2, 2, 1, 1, 3))):
        path = tmp_path / "s.json"
        spec_io.write_spec(spec, path)
        assert spec_io.read_spec(path) == spec


@given(st.integers(0, 10**9))
def test_random_spec_round_trips_bit_exactly(seed):
    spec = generate_random_episodic(3, 2, 3, 2, seed)
    back = spec_io.spec_from_fields(json.loads(spec_io.dumps_document(spec_io.spec_to_fields(spec))))
    for a, b in zip(spec.transitions + spec.rewards, back.transitions + back.rewards):
        assert a.tobytes() == b.tobytes()


def test_written_file_is_lf_only(tmp_path, g1):
    path = tmp_path / "g.json"
    spec_io.write_spec(g1, path)
    assert b"\r" not in path.read_bytes()


def test_missing_field_is_named(tmp_path, g1):
    fields = spec_io.spec_to_fields(g1)
    del fields["transitions"]
    path = tmp_path / "bad.json"
    path.write_text(spec_io.dumps_document(fields))
    with pytest.raises(spec_io.SpecFormatError, match="missing field 'transitions'"):
        spec_io.read_spec(path)


def test_version_mismatch(tmp_path, g1):
    fields = spec_io.spec_to_fields(g1)
    fields["format_version"] = 99
    with pytest.raises(spec_io.SpecFormatError, match="schema version mismatch"):
        spec_io.spec_from_fields(fields)


def test_parse_error_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "kind": \n}')
    with pytest.raises(spec_io.SpecFormatError, match="line 3, column 1"):
        spec_io.read_spec(path)


def test_non_finite_numbers_are_refused():
    with pytest.raises(ValueError):
        spec_io.dumps_value([1.0, float("nan")])


def test_float_formatting_round_trips():
    x = 0.1 + 0.2
    assert float(spec_io.dumps_value(x)) == x
    assert spec_io.dumps_value(np.array([[1, 2]])) == "[[1, 2]]"


def test_solution_export(tmp_path, g1):
    sol = solve_episodic(g1)
    path = tmp_path / "sol.json"
    spec_io.write_solution(sol, path, {"V1": 1.0})
    doc = json.loads(path.read_text())
    assert doc["gap_plus_min"] == 0.5
    assert doc["V1"] == 1.0
    assert doc["pi"] == [[0]] and doc["mu"] == [[0]]
