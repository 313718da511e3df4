import math

import numpy as np
import pytest

from helpers import oracle_cv, oracle_e, oracle_m, oracle_r, random_degree_rows
from sgldl.distributions import LabelSpace, label_range
from sgldl.scm import (
    ScalableCorrelationMatrix,
    ScmFormatError,
    coefficient_of_variation,
    compute_E,
    compute_M,
    compute_R,
    deserialize_scm,
    extend_scm,
    heatmap_rows,
    initial_scm,
    new_new_stat,
    new_old_stat,
    old_new_stat,
    serialize_scm,
)

FIXTURE = np.array([[0.8, 0.2], [0.6, 0.4], [0.5, 0.5]])


def test_new_new_stat():
    assert new_new_stat(0.8, 0.2) == pytest.approx(4.0)
    assert new_new_stat(0.2, 0.0) is None
    assert new_new_stat(0.5, 0.5) == 1.0


def test_old_new_stat():
    assert old_new_stat(0.2, 0.4, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert old_new_stat(0.2, 0.4, 0.0) is None
    assert old_new_stat(0.2, 0.0, 0.5) is None
    assert old_new_stat(1.0, 0.4, 0.5) is None
    assert old_new_stat(0.0, 0.4, 0.5) == 0.0


def test_new_old_stat():
    assert new_old_stat(0.2, 0.4, 0.5) == pytest.approx(2.0, abs=1e-15)
    assert new_old_stat(0.0, 0.4, 0.5) is None
    assert new_old_stat(0.2, 0.4, 0.0) == 0.0


def test_stat_reciprocity():
    rng = np.random.default_rng(0)
    for _ in range(500):
        d_new, d_old, d_pred = rng.random(3)
        e = old_new_stat(d_new, d_old, d_pred)
        r = new_old_stat(d_new, d_old, d_pred)
        if e is not None and r is not None and e != 0.0:
            assert abs(r - 1.0 / e) <= 1e-12 * max(1.0, abs(r))


def test_coefficient_of_variation():
    assert coefficient_of_variation([2.0, 2.0, 2.0]) == 0.0
    # mean 13/6, population variance 31/18
    expected = math.sqrt(31.0 / 18.0) / (13.0 / 6.0)
    assert coefficient_of_variation([4.0, 1.5, 1.0]) == pytest.approx(expected, abs=1e-15)
    assert coefficient_of_variation([4.0, 1.5, 1.0]) == pytest.approx(
        oracle_cv([4.0, 1.5, 1.0]), abs=1e-15
    )
    assert coefficient_of_variation([]) == 0.0
    assert coefficient_of_variation([0.0, 0.0]) == 0.0


def test_compute_m_hand_fixture():
    m = compute_M(FIXTURE)
    assert m[0, 1] == pytest.approx(math.sqrt(31.0 / 18.0) / (13.0 / 6.0), abs=1e-15)
    assert m[0, 0] == 0.0 and m[1, 1] == 0.0
    # identical ratio sequences give zero volatility
    same = np.array([[0.5, 0.25], [0.4, 0.2], [0.2, 0.1]])
    assert compute_M(same)[0, 1] == 0.0
    assert compute_M(same)[1, 0] == 0.0


def test_compute_m_counts_and_errors():
    m, counts = compute_M(np.array([[0.5, 0.5], [1.0, 0.0]]), with_counts=True)
    assert counts[0, 1] == 1  # second sample inadmissible for pairs ( . , 1)
    assert counts[0, 0] == 2
    with pytest.raises(ValueError):
        compute_M(np.zeros((0, 3)))


def test_symmetric_inputs_sanity():
    rng = np.random.default_rng(4)
    base = rng.random(10) + 0.1
    degrees = np.stack([base, base], axis=1)
    m = compute_M(degrees)
    assert m[0, 1] == 0.0 and m[1, 0] == 0.0


def test_compute_e_r_hand_fixture():
    new = np.array([[0.2, 0.1], [0.3, 0.2], [0.4, 0.3]])
    old = np.array([[0.4, 0.3], [0.2, 0.3], [0.1, 0.2]])
    pred = np.array([[0.5, 0.5], [0.4, 0.6], [0.3, 0.7]])
    e = compute_E(new, old, pred)
    r = compute_R(new, old, pred)
    assert np.abs(e - oracle_e(new, old, pred)).max() <= 1e-12
    assert np.abs(r - oracle_r(new, old, pred)).max() <= 1e-12
    # all-equal statistics give zero entries
    const_new = np.full((3, 1), 0.2)
    const_old = np.full((3, 1), 0.4)
    const_pred = np.full((3, 1), 0.5)
    assert compute_E(const_new, const_old, const_pred)[0, 0] == 0.0
    assert compute_R(const_new, const_old, const_pred)[0, 0] == 0.0
    # no admissible samples
    zero_pred = np.zeros((3, 1))
    assert compute_E(const_new, const_old, zero_pred)[0, 0] == 0.0
    assert compute_R(np.zeros((3, 1)), const_old, const_pred)[0, 0] == 0.0


def test_compute_e_shape_mismatch():
    with pytest.raises(ValueError):
        compute_E(np.ones((3, 2)) * 0.1, np.ones((3, 2)) * 0.1, np.ones((4, 2)) * 0.1)


def test_oracle_equivalence_random_fixtures():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n = int(rng.integers(1, 21))
        c = int(rng.integers(2, 7))
        c_old = int(rng.integers(1, c))
        degrees = random_degree_rows(rng, n, c)
        old_pred = random_degree_rows(rng, n, c_old)
        new = degrees[:, c_old:]
        old = degrees[:, :c_old]
        for lib, oracle in (
            (compute_M(new), oracle_m(new)),
            (compute_E(new, old, old_pred), oracle_e(new, old, old_pred)),
            (compute_R(new, old, old_pred), oracle_r(new, old, old_pred)),
        ):
            scale = np.maximum(1.0, np.abs(oracle))
            assert (np.abs(lib - oracle) / scale).max() <= 1e-12


def test_entries_finite_and_nonnegative_fuzz():
    rng = np.random.default_rng(9)
    for _ in range(30):
        n = int(rng.integers(1, 15))
        c = int(rng.integers(2, 6))
        c_old = int(rng.integers(1, c))
        degrees = random_degree_rows(rng, n, c, zero_rate=0.4)
        old_pred = random_degree_rows(rng, n, c_old, zero_rate=0.4)
        for block in (
            compute_M(degrees[:, c_old:]),
            compute_E(degrees[:, c_old:], degrees[:, :c_old], old_pred),
            compute_R(degrees[:, c_old:], degrees[:, :c_old], old_pred),
        ):
            assert np.all(np.isfinite(block))
            assert block.min() >= 0.0


def test_initial_and_extend():
    m1 = compute_M(FIXTURE)
    scm1 = initial_scm(m1, label_range(2))
    assert scm1.block_boundary == 0
    assert np.array_equal(scm1.entries, m1)

    new_labels = LabelSpace((2,))
    e = np.array([[0.3], [0.4]])
    r = np.array([[0.5, 0.6]])
    m2 = np.array([[0.0]])
    scm2 = extend_scm(scm1, m2, e, r, new_labels)
    assert scm2.entries.shape == (3, 3)
    assert scm2.block_boundary == 2
    assert np.array_equal(scm2.entries[:2, :2], scm1.entries)
    assert np.array_equal(scm2.entries[:2, 2:], e)
    assert np.array_equal(scm2.entries[2:, :2], r)

    # double extension keeps the original corner bit-exact
    scm3 = extend_scm(
        scm2, np.zeros((1, 1)), np.full((3, 1), 0.1), np.full((1, 3), 0.2), LabelSpace((3,))
    )
    assert np.array_equal(scm3.entries[:2, :2], m1)


def test_extend_shape_mismatch():
    scm1 = initial_scm(np.zeros((2, 2)), label_range(2))
    with pytest.raises(ValueError):
        extend_scm(scm1, np.zeros((1, 1)), np.zeros((3, 1)), np.zeros((1, 2)), LabelSpace((2,)))


def test_serialize_round_trip():
    rng = np.random.default_rng(11)
    entries = rng.random((5, 5)) * 7.0
    scm = ScalableCorrelationMatrix(label_range(5), entries, 3)
    back = deserialize_scm(serialize_scm(scm))
    assert back.labels == scm.labels
    assert back.block_boundary == 3
    assert np.array_equal(back.entries, scm.entries)


def test_deserialize_errors():
    with pytest.raises(ScmFormatError):
        deserialize_scm("")
    with pytest.raises(ScmFormatError):
        deserialize_scm("scm x y\n0\n1\n")
    err = None
    try:
        deserialize_scm("scm 2 0\n0,1\n0,0\n0\n")
    except ScmFormatError as exc:
        err = exc
    assert err is not None and err.line == 4
    try:
        deserialize_scm("scm 2 0\n0,1\n0,zap\n0,0\n")
    except ScmFormatError as exc:
        assert exc.line == 3 and exc.column == 2


def test_matrix_validation():
    with pytest.raises(ValueError):
        ScalableCorrelationMatrix(label_range(2), np.array([[0.0, -1.0], [0.0, 0.0]]), 0)
    with pytest.raises(ValueError):
        ScalableCorrelationMatrix(label_range(2), np.full((2, 2), np.nan), 0)
    with pytest.raises(ValueError):
        ScalableCorrelationMatrix(label_range(2), np.zeros((2, 2)), 5)


def test_heatmap_rows():
    scm = initial_scm(np.array([[0.0, 0.5], [0.25, 0.0]]), label_range(2))
    rows = heatmap_rows(scm)
    assert len(rows) == 4
    assert rows[1] == (0, 1, 0.5)
