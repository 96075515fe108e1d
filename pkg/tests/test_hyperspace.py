import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypercontroller.hyperspace import (
    Grid,
    Dimension,
    HyperSpace,
    build_grid,
    config_to_index,
    flat_index,
    index_to_config,
)


def space(*dims):
    return HyperSpace(tuple(dims))


def test_unit_interval_five_points():
    grid = build_grid(space(Dimension("x", 0, 1)), 5)
    assert grid.values[0].tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert grid.spacing == (0.25,)


def test_learning_rate_decades():
    grid = build_grid(space(Dimension("lr", 1e-5, 1e-1, "log10")), 5)
    np.testing.assert_allclose(grid.values[0], [1e-5, 1e-4, 1e-3, 1e-2, 1e-1], rtol=1e-12)
    assert grid.spacing == (1.0,)
    assert grid.values[0][0] == 1e-5 and grid.values[0][-1] == 1e-1


def test_batch_size_two_points():
    grid = build_grid(space(Dimension("N", 32, 128)), 2)
    assert grid.values[0].tolist() == [32.0, 128.0]
    assert grid.spacing == (96.0,)


@pytest.fixture
def small_grid():
    sp = space(Dimension("a", 0, 1), Dimension("b", 10, 20))
    return Grid.from_values(sp, [[0, 0.5, 1], [10, 20]])


def test_direct_lookup(small_grid):
    assert index_to_config(small_grid, (0, 1)) == {"a": 0.0, "b": 20.0}
    assert index_to_config(small_grid, (2, 0)) == {"a": 1.0, "b": 10.0}


def test_roundtrip_all_six_cells(small_grid):
    cells = list(itertools.product(range(3), range(2)))
    assert len(cells) == 6
    for A in cells:
        assert config_to_index(small_grid, index_to_config(small_grid, A)) == A


@pytest.mark.parametrize(
    "dims, d",
    [
        ((Dimension("x", 0, 1),), 1),
        ((Dimension("x", 0, 1),), 0),
    ],
)
def test_rejects_small_d(dims, d):
    with pytest.raises(ValueError):
        build_grid(HyperSpace(dims), d)


def test_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        Dimension("lr", 0.0, 1.0, "log10")
    with pytest.raises(ValueError):
        Dimension("x", 1.0, 1.0)
    with pytest.raises(ValueError):
        Dimension("x", 0, 1, "cubic")
    with pytest.raises(ValueError):
        HyperSpace((Dimension("x", 0, 1), Dimension("x", 2, 3)))
    with pytest.raises(ValueError):
        HyperSpace(())


def test_out_of_range_index():
    grid = build_grid(space(Dimension("x", 0, 1), Dimension("y", 0, 1)), 3)
    with pytest.raises(IndexError):
        index_to_config(grid, (0, 3))
    with pytest.raises(ValueError):
        index_to_config(grid, (0,))


def test_off_grid_value_rejected():
    grid = build_grid(space(Dimension("x", 0, 1)), 5)
    with pytest.raises(ValueError):
        config_to_index(grid, {"x": 0.3})
    with pytest.raises(ValueError):
        config_to_index(grid, {})


def test_flat_index_row_major():
    assert flat_index((0, 0), (5, 5)) == 0
    assert flat_index((1, 2), (5, 5)) == 7


dims_strategy = st.lists(
    st.tuples(
        st.floats(-1e3, 1e3, allow_nan=False),
        st.floats(1e-3, 1e3, allow_nan=False),
        st.booleans(),
    ),
    min_size=1,
    max_size=3,
)


@settings(max_examples=60, deadline=None)
@given(dims_strategy, st.integers(2, 6))
def test_grid_invariants(raw, d):
    dims = []
    for k, (lo, width, log) in enumerate(raw):
        if log:
            lo_pos = abs(lo) % 10 + 1e-3
            dims.append(Dimension(f"x{k}", lo_pos, lo_pos * (1 + width), "log10"))
        else:
            dims.append(Dimension(f"x{k}", lo, lo + width))
    sp = HyperSpace(tuple(dims))
    grid = build_grid(sp, d)
    for i, dim in enumerate(sp.dims):
        v, c = grid.values[i], grid.coords[i]
        assert len(v) == d
        assert v[0] == dim.lo and v[-1] == dim.hi
        assert np.all(np.diff(v) > 0)
        ulp = np.spacing(np.max(np.abs(c)))
        assert np.all(np.abs(np.diff(c) - grid.spacing[i]) <= 2 * ulp)
        if dim.scale == "log10":
            ratios = v[1:] / v[:-1]
            np.testing.assert_allclose(ratios, ratios[0], rtol=1e-9)
    for A in itertools.product(range(d), repeat=sp.h):
        assert config_to_index(grid, index_to_config(grid, A)) == A
