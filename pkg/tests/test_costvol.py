import numpy as np
import pytest

from oracles import cost_loop, lattice
from voxelopt.costvol import build_cost, lattice_index, lattice_offsets, unit_subset
from voxelopt.errors import ShapeError


@pytest.mark.parametrize("k", [1, 2, 3])
def test_lattice(k):
    offs = lattice_offsets(k)
    assert len(offs) == (2 * k + 1) ** 3
    assert [tuple(o) for o in offs] == lattice(k)
    assert lattice_index((0, 0, 0), k) == len(offs) // 2
    for i, o in enumerate(offs):
        assert lattice_index(o, k) == i


def test_unit_subset_picks_central_offsets():
    offs = lattice_offsets(3)
    np.testing.assert_array_equal(offs[unit_subset(3)], lattice_offsets(1))


def test_identical_constant_inputs_give_zero():
    f = np.full((4, 4, 4, 2), 0.3)
    assert not build_cost(f, f.copy(), 1).costs.any()


def test_unit_difference():
    c = build_cost(np.ones((4, 5, 3)), np.zeros((4, 5, 3)), 1)
    np.testing.assert_array_equal(c.costs, 1.0)


@pytest.mark.parametrize("k", [1, 2])
def test_matches_loop_oracle(rng, k):
    f = rng.random((5, 5, 5, 3))
    m = rng.random((5, 5, 5, 3))
    np.testing.assert_allclose(build_cost(f, m, k).costs, cost_loop(f, m, k), atol=1e-14)


def test_zero_offset_is_mean_abs_difference(rng):
    f = rng.random((5, 4, 3, 4))
    m = rng.random((5, 4, 3, 4))
    np.testing.assert_array_equal(build_cost(f, m, 1).at((0, 0, 0)), np.abs(f - m).mean(axis=-1))


def test_swap_symmetry_on_interior(rng):
    f = rng.random((6, 6, 6, 2))
    m = rng.random((6, 6, 6, 2))
    cfm = build_cost(f, m, 1)
    cmf = build_cost(m, f, 1)
    for o in lattice_offsets(1):
        for x in np.ndindex(4, 4, 4):
            x = np.array(x) + 1
            y = x + o
            assert cfm.at(o)[tuple(x)] == cmf.at(-o)[tuple(y)]


def test_self_cost_argmin_is_zero_offset(rng):
    f = rng.random((5, 5, 5, 2))
    c = build_cost(f, f, 1)
    assert not c.at((0, 0, 0)).any()
    assert np.all(c.costs.min(axis=0) == 0)


def test_costs_nonnegative(rng):
    c = build_cost(rng.normal(size=(4, 4, 4)), rng.normal(size=(4, 4, 4)), 2)
    assert np.all(c.costs >= 0) and np.all(np.isfinite(c.costs))


def test_mismatch_errors(rng):
    with pytest.raises(ShapeError):
        build_cost(rng.random((4, 4, 4)), rng.random((4, 4, 5)), 1)
    with pytest.raises(ShapeError):
        build_cost(rng.random((4, 4, 4, 2)), rng.random((4, 4, 4, 3)), 1)
    with pytest.raises(ValueError):
        build_cost(rng.random((4, 4, 4)), rng.random((4, 4, 4)), 0)
