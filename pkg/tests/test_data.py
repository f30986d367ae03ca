"""Tests for the Dataset container and CSV round-trips."""

import numpy as np
import pytest

from cmiselect.data import Dataset


def test_round_trip_exact(tmp_path):
    rng = np.random.default_rng(0)
    ds = Dataset(blocks=[rng.normal(size=(20, 3)), rng.normal(size=(20, 1))],
                 y=rng.normal(size=20),
                 extras={"r": rng.normal(size=20)})
    path = tmp_path / "d.csv"
    ds.to_csv(path)
    back = Dataset.from_csv(path)
    assert back.feature_dims == [3, 1]
    for a, b in zip(ds.blocks, back.blocks):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(ds.y, back.y)
    np.testing.assert_array_equal(ds.extras["r"], back.extras["r"])


def test_one_dim_blocks_become_columns():
    ds = Dataset(blocks=[np.arange(4.0)], y=np.zeros(4))
    assert ds.blocks[0].shape == (4, 1)
    assert ds.n == 4 and ds.m == 1


def test_row_count_mismatch_rejected():
    with pytest.raises(ValueError, match="block 0"):
        Dataset(blocks=[np.zeros((3, 1))], y=np.zeros(4))


def test_from_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("")
    with pytest.raises(ValueError, match="empty"):
        Dataset.from_csv(p)
    p.write_text("x0_0,y\n")
    with pytest.raises(ValueError, match="no data rows"):
        Dataset.from_csv(p)
    p.write_text("x0_0,r\n1.0,2.0\n")
    with pytest.raises(ValueError, match="missing 'y'"):
        Dataset.from_csv(p)
    p.write_text("x0_0,y\n1.0\n")
    with pytest.raises(ValueError, match=":2:"):
        Dataset.from_csv(p)
    p.write_text("x0_0,y\n1.0,abc\n")
    with pytest.raises(ValueError, match=":2:"):
        Dataset.from_csv(p)
