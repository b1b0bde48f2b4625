import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revealbandit.errors import ConfigurationError, ParseError
from revealbandit.graph_model import (
    GraphSpec,
    InfluenceMatrix,
    apply_uniform_probability,
    generate,
    load_matrix,
    load_snap,
    lower_bound_asymmetric,
    lower_bound_symmetric,
    parse_graph_spec,
    save_matrix,
    write_snap,
)
from revealbandit.analysis import dual_gap_count
from revealbandit.environment import oracle_stats


def test_complete_graph():
    m = generate(GraphSpec("complete", 3, 1.0))
    expected = np.ones((3, 3)) - np.eye(3)
    np.testing.assert_array_equal(m.to_dense(), expected)


def test_star_graph():
    m = generate(GraphSpec("star", 4, 0.5))
    assert m.rows == [[(1, 0.5), (2, 0.5), (3, 0.5)], [(0, 0.5)], [(0, 0.5)], [(0, 0.5)]]


def test_empty_graph():
    m = generate(GraphSpec("empty", 5, 1.0))
    assert m.nnz == 0 and m.d == 5


def test_barabasi_albert_edge_count_and_probabilities():
    m = generate(GraphSpec("barabasi_albert", 1000, 0.8, {"m": 10}), seed=0)
    # complete seed on m nodes, then m edges per arriving node
    assert m.nnz == 2 * (10 * (1000 - 10) + 10 * 9 // 2) == 2 * 9945
    assert np.all(m.probs == 0.8)
    assert m.is_pattern_symmetric()
    assert not np.any(m.to_dense().diagonal())


def test_barabasi_albert_is_deterministic_per_seed():
    spec = GraphSpec("barabasi_albert", 200, 0.8, {"m": 3})
    assert generate(spec, seed=7) == generate(spec, seed=7)
    assert generate(spec, seed=7) != generate(spec, seed=8)


@pytest.mark.parametrize(
    "spec",
    [
        GraphSpec("barabasi_albert", 10, 0.5, {"m": 10}),
        GraphSpec("barabasi_albert", 10, 0.5, {"m": 0}),
        GraphSpec("star", 0, 0.5),
        GraphSpec("complete", 3, 0.0),
        GraphSpec("complete", 3, 1.5),
        GraphSpec("nonsense", 3, 0.5),
    ],
)
def test_invalid_specs(spec):
    with pytest.raises(ConfigurationError):
        generate(spec)


def test_lower_bound_symmetric_values():
    m = lower_bound_symmetric(2, 1, 100)
    dense = m.to_dense()
    np.testing.assert_array_equal(dense[0], [0.5, 0.5])
    assert dense[1, 0] == dense[1, 1] == 0.5 - math.sqrt(1 / 200)
    assert dense[1, 1] == pytest.approx(0.4293, abs=1e-4)

    m = lower_bound_symmetric(4, 2, 64)
    assert m.to_dense()[2, 3] == pytest.approx(0.4116, abs=1e-4)


def test_lower_bound_symmetric_gap():
    d, r, n = 4, 2, 64
    stats = oracle_stats(lower_bound_symmetric(d, r, n))
    gaps = stats.r[0] - stats.r[1:]
    np.testing.assert_allclose(gaps, math.sqrt(d * r / n), rtol=1e-12)


def test_lower_bound_symmetric_rejects_underflow():
    with pytest.raises(ConfigurationError):
        lower_bound_symmetric(2, 1, 1)


def test_lower_bound_asymmetric():
    m = lower_bound_asymmetric(3, 1, 100, k0=2)
    dense = m.to_dense()
    np.testing.assert_array_equal(dense[:, 2], [1, 1, 1])
    stats = oracle_stats(m)
    assert stats.r_dual[2] == 3
    assert dual_gap_count(m, 0.0) == 1


def test_lower_bound_asymmetric_explicit_profile():
    m = lower_bound_asymmetric(3, [2.0, 1.0, 0.5], 10, k0=1)
    dense = m.to_dense()
    np.testing.assert_allclose(dense[0], [2 / 3, 1, 2 / 3])
    np.testing.assert_allclose(dense[2], [0.5 / 3, 1, 0.5 / 3])


@pytest.mark.parametrize(
    "profile,k0",
    [([4.0, 1.0, 1.0], 1), ([2.0, 1.0, 1.0], 0), ([1.0, 1.0], 1)],
)
def test_lower_bound_asymmetric_errors(profile, k0):
    with pytest.raises(ConfigurationError):
        lower_bound_asymmetric(3, profile, 10, k0)


def test_apply_uniform_probability():
    star = generate(GraphSpec("star", 3, 1.0))
    m = apply_uniform_probability(star, 0.8)
    assert np.all(m.probs == 0.8)
    np.testing.assert_array_equal(m.indices, star.indices)
    assert apply_uniform_probability(m, 1.0) == star
    with pytest.raises(ConfigurationError):
        apply_uniform_probability(star, 0)


def test_matrix_invariants_rejected():
    with pytest.raises(ConfigurationError):
        InfluenceMatrix.from_entries(2, [(0, 1, 0.5), (0, 1, 0.4)])
    with pytest.raises(ConfigurationError):
        InfluenceMatrix.from_entries(2, [(0, 2, 0.5)])
    with pytest.raises(ConfigurationError):
        InfluenceMatrix.from_entries(2, [(0, 1, 1.5)])
    with pytest.raises(ConfigurationError):
        InfluenceMatrix(2, np.array([0, 2, 2]), np.array([1, 0]), np.array([0.5, 0.5]))


def test_matrix_is_immutable():
    m = generate(GraphSpec("star", 3, 1.0))
    with pytest.raises(ValueError):
        m.probs[0] = 0.1


# ---------------------------------------------------------------------------
# SNAP loading


def test_snap_basic(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("# comment\n0 1\n1 0\n")
    m = load_snap(path)
    assert m.d == 2
    assert m.rows == [[(1, 1.0)], [(0, 1.0)]]


def test_snap_duplicates_and_remap(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("5 9\n9 5\n5 9\n")
    m = load_snap(path)
    assert m.d == 2 and m.nnz == 2


def test_snap_fixture(fixture_path):
    m = load_snap(fixture_path)
    assert m.d == 9
    expected = {
        (0, 1), (0, 2), (1, 2), (2, 0), (3, 0), (3, 4), (4, 5), (5, 3),
        (6, 6), (7, 0), (1, 7), (8, 0), (2, 8), (4, 3), (6, 0),
    }
    assert set(zip(m.row_ids().tolist(), m.indices.tolist())) == expected
    assert m.to_dense()[6, 6] == 1.0


def test_snap_symmetrize(fixture_path):
    m = load_snap(fixture_path, symmetrize=True)
    assert m.is_pattern_symmetric()
    dense = m.to_dense()
    np.testing.assert_array_equal(dense, dense.T)
    assert not load_snap(fixture_path).is_pattern_symmetric()


@pytest.mark.parametrize(
    "text,line",
    [("0 1\n1 x\n", 2), ("# c\n0 1 2\n", 2), ("0 1\n\n7\n", 3), ("1.5 2\n", 1)],
)
def test_snap_malformed_line_names_line_number(tmp_path, text, line):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(ParseError) as err:
        load_snap(path)
    assert err.value.line == line
    assert f":{line}" in str(err.value)


def test_snap_missing_file(tmp_path):
    with pytest.raises(ParseError):
        load_snap(tmp_path / "absent.txt")


def test_snap_round_trip(tmp_path, fixture_path):
    first = load_snap(fixture_path, symmetrize=True)
    out = tmp_path / "again.txt"
    write_snap(first, out)
    assert load_snap(out) == first


def test_internal_format_round_trip(tmp_path):
    m = generate(GraphSpec("barabasi_albert", 50, 0.37, {"m": 2}), seed=3)
    path = tmp_path / "m.txt"
    save_matrix(m, path)
    assert path.read_text().startswith("d=50\n")
    assert load_matrix(path) == m


def test_internal_format_errors(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("# fixture\nd=2\n0 1 0.5\n0 1\n")
    with pytest.raises(ParseError) as err:
        load_matrix(path)
    assert err.value.line == 4
    path.write_text("0 1 0.5\n")
    with pytest.raises(ParseError):
        load_matrix(path)


def test_parse_graph_spec_round_trip():
    spec = parse_graph_spec("ba:d=1000,m=10,p=0.8")
    assert spec == GraphSpec("barabasi_albert", 1000, 0.8, {"m": 10})
    assert parse_graph_spec(spec.to_string()) == spec
    fspec = parse_graph_spec("file:path=x.txt,symmetrize=true,p=0.8")
    assert fspec.params == {"path": "x.txt", "symmetrize": True}


def test_parse_graph_spec_bare_path(fixture_path):
    spec = parse_graph_spec(fixture_path)
    assert spec.kind == "file" and spec.params["path"] == fixture_path


@st.composite
def edge_lists(draw):
    return draw(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=40))


@settings(max_examples=60, deadline=None)
@given(edges=edge_lists(), symmetrize=st.booleans(), p=st.floats(0.01, 1.0))
def test_loaded_matrices_satisfy_invariants(tmp_path_factory, edges, symmetrize, p):
    path = tmp_path_factory.mktemp("snap") / "g.txt"
    path.write_text("".join(f"{a} {b}\n" for a, b in edges))
    loaded = load_snap(path, symmetrize)
    m = apply_uniform_probability(loaded, p)
    assert len(m.rows) == m.d
    assert m.d == len({x for e in edges for x in e})
    assert m.nnz <= (2 if symmetrize else 1) * len(edges)
    assert np.all((m.probs > 0) & (m.probs <= 1))
    for row in m.rows:
        cols = [j for j, _ in row]
        assert cols == sorted(set(cols)) and all(j < m.d for j in cols)
    if symmetrize:
        dense = m.to_dense()
        np.testing.assert_array_equal(dense, dense.T)
    again = tmp_path_factory.mktemp("snap") / "h.txt"
    write_snap(loaded, again)
    assert load_snap(again) == loaded
