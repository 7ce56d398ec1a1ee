import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ML_FIXTURE
from dcae.data import (
    ParseError,
    format_ratings,
    parse_ratings,
    read_ratings,
    split,
    synthesize,
    write_ratings,
    write_split,
)


def test_two_line_fixture():
    r = parse_ratings("1::10::4.0::978300760\n2::10::3.0::978302109", "mlcolon")
    assert (r.n_rows, r.n_cols) == (2, 1)
    assert list(zip(r.rows.tolist(), r.cols.tolist(), r.values.tolist())) == [(0, 0, 4.0), (1, 0, 3.0)]
    assert r.row_ids == ("1", "2") and r.col_ids == ("10",)


def test_empty_stream():
    with pytest.raises(ParseError, match="no entries"):
        parse_ratings("", "mlcolon")
    with pytest.raises(ParseError):
        parse_ratings("# only a comment\n\n", "csv")


def test_duplicate_names_line():
    lines = [f"{u}::{i}::3::0" for u, i in [(1, 1), (1, 2), (2, 1), (2, 3), (3, 3), (4, 1), (4, 2), (5, 5), (2, 3), (6, 1)]]
    with pytest.raises(ParseError, match="line 9") as exc:
        parse_ratings("\n".join(lines), "mlcolon")
    assert exc.value.line == 9
    assert "first seen on line 4" in str(exc.value)


@pytest.mark.parametrize("text", ["1::2", "1::2::abc", "1::2::3::4::5", "::2::3", "1::2::inf"])
def test_malformed_lines(text):
    with pytest.raises(ParseError, match="line 2"):
        parse_ratings("7::7::1\n" + text, "mlcolon")


def test_comments_blank_lines_and_sparse_ids():
    r = parse_ratings("# header\n\n100 7 2.5\n3 7000 1\n100 7000 4 12345\n", "ws")
    assert r.row_ids == ("3", "100") and r.col_ids == ("7", "7000")
    np.testing.assert_array_equal(r.rows, [0, 1, 1])
    np.testing.assert_array_equal(r.cols, [1, 0, 1])
    np.testing.assert_array_equal(r.values, [1.0, 2.5, 4.0])


def test_formats_parse_identically():
    base = read_ratings(ML_FIXTURE, "mlcolon")
    for fmt in ("csv", "ws"):
        again = parse_ratings(format_ratings(base, fmt), fmt)
        assert again.same_as(base)


def test_roundtrip(tmp_path):
    base = read_ratings(ML_FIXTURE, "mlcolon")
    assert base.nnz == 1000
    path = tmp_path / "out.dat"
    write_ratings(path, base, "mlcolon")
    assert read_ratings(path, "mlcolon").same_as(base)


def test_split_counts_and_determinism():
    r = synthesize(5, 2, 1, 1.0, seed=0)
    assert r.nnz == 10
    a = split(r, 0.7, seed=11)
    b = split(r, 0.7, seed=11)
    assert (a.train.nnz, a.test.nnz) == (7, 3)
    assert a.train.same_as(b.train) and a.test.same_as(b.test)


def test_split_seeds_differ():
    r = read_ratings(ML_FIXTURE, "mlcolon")
    a, b = split(r, 0.7, seed=1), split(r, 0.7, seed=2)
    assert not a.train.same_as(b.train)


def _keys(r):
    return set(zip(r.rows.tolist(), r.cols.tolist()))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 300), st.floats(0.05, 0.95), st.integers(0, 2**31))
def test_split_partition(n, frac, seed):
    r = synthesize(n, 1, 1, 1.0, seed=0)
    n_train = round(frac * n)
    if n_train in (0, n):
        with pytest.raises(ValueError):
            split(r, frac, seed)
        return
    s = split(r, frac, seed)
    assert s.train.nnz == n_train
    assert _keys(s.train).isdisjoint(_keys(s.test))
    assert _keys(s.train) | _keys(s.test) == _keys(r)


def test_split_bad_fraction():
    r = synthesize(4, 4, 1, 1.0)
    for frac in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            split(r, frac)


def test_write_split_sidecar(tmp_path):
    r = read_ratings(ML_FIXTURE, "mlcolon")
    s = split(r, 0.7, seed=3)
    train_path, test_path, meta_path = write_split(tmp_path, s, "mlcolon")
    meta = json.loads(open(meta_path).read())
    assert meta["n_train"] == 700 and meta["n_test"] == 300 and meta["seed"] == 3
    assert len(meta["row_ids"]) == r.n_rows
    back = read_ratings(train_path, "mlcolon").nnz + read_ratings(test_path, "mlcolon").nnz
    assert back == r.nnz


def test_synthesize_contracts():
    r = synthesize(20, 15, 3, 0.5, 0.1, seed=4)
    assert r.nnz == 150
    assert np.all(r.values >= 0)
    assert r.same_as(synthesize(20, 15, 3, 0.5, 0.1, seed=4))
    full = synthesize(6, 5, 2, 1.0, 0.0, seed=1)
    assert full.nnz == 30
    for bad in (dict(density=0.0), dict(density=1.5), dict(t_true=0), dict(noise_sd=-1)):
        kw = dict(m=4, n=4, t_true=1, density=0.5, noise_sd=0.0)
        kw.update(bad)
        with pytest.raises(ValueError):
            synthesize(**kw)


def test_noise_free_recovery():
    from dcae.matcomp import MatcompInstance, build_dc_problem, initial_factors
    from dcae.solvers import DCAE, SolverConfig, run_solver

    r = synthesize(20, 15, 3, 1.0, 0.0, seed=2)
    inst = MatcompInstance(r, 3)
    problem, oracle = build_dc_problem(inst)
    res = run_solver(problem, oracle, initial_factors(inst, seed=0), SolverConfig(max_iterations=3000, tol=0.0), DCAE)
    assert inst.loss_value(res.x) < 1e-2 * float(r.values @ r.values)
