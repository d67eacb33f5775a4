import numpy as np
import pytest

from voxelopt.config import RegistrationConfig
from voxelopt.errors import ShapeError
from voxelopt.pyramid import build_pyramid, register
from voxelopt.synth import endpoint_error, make_pair, texture


class TestBuildPyramid:
    def test_single_level(self, rng):
        f = rng.random((6, 6, 6))
        pyr = build_pyramid(f, 1)
        assert len(pyr) == 1 and pyr[0] is f

    def test_halving(self, rng):
        pyr = build_pyramid(rng.random((16, 16, 16, 2)), 3)
        assert [p.shape for p in pyr] == [(16, 16, 16, 2), (8, 8, 8, 2), (4, 4, 4, 2)]

    def test_odd_dims_round_up(self, rng):
        assert [p.shape for p in build_pyramid(rng.random((13, 11, 9)), 3)] == \
            [(13, 11, 9), (7, 6, 5), (4, 3, 3)]

    def test_constant(self):
        for p in build_pyramid(np.full((12, 12, 12), 0.25), 3):
            np.testing.assert_array_equal(p, 0.25)

    def test_too_many_levels(self, rng):
        with pytest.raises(ShapeError):
            build_pyramid(rng.random((16, 16, 16)), 4)
        with pytest.raises(ValueError):
            build_pyramid(rng.random((16, 16, 16)), 0)


class TestRegister:
    def test_identity_on_small_grid(self, rng):
        f = texture((24, 24, 24), rng)
        res = register(f, f, RegistrationConfig(levels=3))
        assert res.field.shape == (24, 24, 24, 3)
        assert np.abs(res.field).max() < 0.1

    def test_translation_recovered_on_small_grid(self):
        pair = make_pair((32, 32, 32), "translation", 3.0, seed=2)
        res = register(pair.fixed, pair.moving, RegistrationConfig(levels=3))
        before = endpoint_error(np.zeros_like(pair.truth), pair.truth, 4)
        assert endpoint_error(res.field, pair.truth, 4) < 0.2 * before

    def test_deterministic_and_records(self):
        pair = make_pair((24, 24, 24), "smooth", 3.0, seed=1)
        cfg = RegistrationConfig(levels=3)
        a = register(pair.fixed, pair.moving, cfg, keep_levels=True)
        b = register(pair.fixed, pair.moving, cfg)
        np.testing.assert_array_equal(a.field, b.field)
        assert [r.dims for r in a.levels] == [(24, 24, 24), (12, 12, 12), (6, 6, 6)]
        assert b.levels == []
        assert set(a.timings) == {"pyramid", "solve", "exponentiate", "warp_compose", "total"}

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            register(rng.random((8, 8, 8)), rng.random((8, 8, 9)), RegistrationConfig(levels=1))
