import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hitask import (ConfigurationError, PartitionSpec, UsageError, create_data, fill_spd,
                    get_partition, num_partitions, read_region, write_region)
from oracles import cholesky_lower


def test_two_level_tiling_of_4x4():
    a = create_data(4, 4, PartitionSpec([(2, 2), (2, 2)]))
    assert num_partitions(a) == (2, 2)
    for i in range(2):
        for j in range(2):
            child = get_partition(a, i, j)
            assert num_partitions(child) == (2, 2)
            for r in range(2):
                for c in range(2):
                    g = get_partition(child, r, c)
                    assert (g.rows, g.cols) == (1, 1)
                    assert num_partitions(g) == (0, 0)
                    assert (g.row_offset, g.col_offset) == (2 * i + r, 2 * j + c)


def test_unpartitioned_scalar():
    a = create_data(1, 1, PartitionSpec([]))
    assert (a.rows, a.cols, a.level) == (1, 1, 0)
    assert a.children is None or len(a.children) == 0
    assert num_partitions(a) == (0, 0)


def test_handle_count_8x8():
    a = create_data(8, 8, PartitionSpec([(2, 2), (2, 2)]))
    assert len(list(a.walk())) == 21
    assert len(a.store.handles) == 21


@pytest.mark.parametrize("levels", [[(0, 2)], [(2, 2), (2, -1)], [(3, 3)]])
def test_invalid_specs(levels):
    with pytest.raises(ConfigurationError):
        create_data(8, 8, PartitionSpec(levels))


def test_ragged_tiling_rejected():
    with pytest.raises(ConfigurationError):
        create_data(64, 64, PartitionSpec.square(3))


def test_get_partition_offsets_and_identity():
    a = create_data(4, 4, PartitionSpec([(2, 2)]))
    h = get_partition(a, 1, 0)
    assert (h.row_offset, h.col_offset, h.rows, h.cols) == (2, 0, 2, 2)
    assert get_partition(a, 0, 0).id == get_partition(a, 0, 0).id
    assert a(1, 0) is h


def test_get_partition_errors():
    a = create_data(4, 4, PartitionSpec([(2, 2)]))
    with pytest.raises(UsageError):
        get_partition(a(0, 0), 0, 0)
    with pytest.raises(UsageError):
        get_partition(a, 2, 0)
    with pytest.raises(UsageError):
        get_partition(a, 0, -1)


def test_num_partitions_levels():
    a = create_data(8, 8, PartitionSpec([(2, 2), (2, 2)]))
    assert num_partitions(a) == (2, 2)
    assert num_partitions(a(1, 1)) == (2, 2)
    assert num_partitions(a(1, 1)(0, 1)) == (0, 0)


def test_levels_and_labels():
    a = create_data(8, 8, PartitionSpec([(2, 2), (2, 2)]))
    g = a(1, 0)(1, 1)
    assert g.level == 2 and g.parent == a(1, 0).id
    assert g.block_coords == (3, 1)
    assert g.label == "A(3,1)"
    assert a(1, 0).label == "A(1,0)"


def test_fill_spd_scalar_range():
    for seed in range(20):
        a = create_data(1, 1)
        fill_spd(a, seed)
        assert 1.0 <= a.view()[0, 0] < 2.0


def test_fill_spd_deterministic_and_symmetric():
    a, b = create_data(16, 16), create_data(16, 16)
    fill_spd(a, 7)
    fill_spd(b, 7)
    assert np.array_equal(a.view(), b.view())
    assert np.array_equal(a.view(), a.view().T)
    c = create_data(16, 16)
    fill_spd(c, 8)
    assert not np.array_equal(a.view(), c.view())


def test_fill_spd_is_positive_definite():
    a = create_data(64, 64)
    fill_spd(a, 42)
    m = a.view().tolist()
    l = np.array(cholesky_lower(m))  # raises if not SPD
    assert np.abs(l @ l.T - a.view()).max() < 1e-10


def test_fill_spd_rejects_non_square():
    with pytest.raises(UsageError):
        fill_spd(create_data(4, 8), 0)


def test_region_round_trips():
    a = create_data(4, 4, PartitionSpec([(2, 2)]))
    assert np.array_equal(read_region(a), np.zeros((4, 4)))
    blk = np.arange(4.0).reshape(2, 2) + 0.5
    write_region(a(0, 1), blk)
    assert np.array_equal(read_region(a(0, 1)), blk)
    full = read_region(a)
    expect = np.zeros((4, 4))
    expect[0:2, 2:4] = blk
    assert np.array_equal(full, expect)
    with pytest.raises(UsageError):
        write_region(a(0, 1), np.zeros((3, 2)))


def test_read_region_is_a_copy():
    a = create_data(2, 2)
    buf = read_region(a)
    buf[0, 0] = 9
    assert a.view()[0, 0] == 0


def test_children_alias_parent_storage():
    a = create_data(4, 4, PartitionSpec([(2, 2)]))
    a(1, 1).view()[0, 0] = 3.0
    assert a.view()[2, 2] == 3.0


divisors = st.sampled_from([1, 2, 3, 4])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(divisors, divisors), max_size=3), divisors, divisors)
def test_children_tile_parent_exactly(levels, sr, sc):
    rows = sc_rows = 1
    for r, c in levels:
        sc_rows *= r
        rows *= c
    n_rows, n_cols = sc_rows * sr, rows * sc
    a = create_data(n_rows, n_cols, PartitionSpec(levels))
    for h in a.walk():
        if h.children is None or not len(h.children):
            continue
        cover = np.zeros((n_rows, n_cols), dtype=int)
        for child in h.walk():
            if child.parent == h.id:
                cover[child.row_offset:child.row_offset + child.rows,
                      child.col_offset:child.col_offset + child.cols] += 1
                assert child.level == h.level + 1
        inside = cover[h.row_offset:h.row_offset + h.rows, h.col_offset:h.col_offset + h.cols]
        assert (inside == 1).all()
        assert cover.sum() == h.rows * h.cols
