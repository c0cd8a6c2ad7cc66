import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import naive_schedule_step
from sparsemac import (IDLE, ConfigError, advance_window, combine_z,
                       connectivity_from_pattern, default_connectivity,
                       level_partition, make_z, schedule_step)
from sparsemac.scheduler import verify_partition

CMAP = default_connectivity(16, 3)
LEVELS = level_partition(CMAP)


class TestDefaultConnectivity:
    def test_lane8_depth3(self):
        assert CMAP.options[8] == ((0, 8), (1, 8), (2, 8), (1, 7), (1, 9),
                                   (2, 6), (2, 10), (1, 5))

    def test_lane0_depth2_drops_step2(self):
        d2 = default_connectivity(16, 2)
        assert d2.options[0] == ((0, 0), (1, 0), (1, 15), (1, 1), (1, 13))

    def test_four_lanes_wrap(self):
        m = default_connectivity(4, 2)
        assert m.options[1][0] == (0, 1)
        assert all(0 <= lane < 4 for opts in m.options for _, lane in opts)
        # modulo collision (1, i-3) == (1, i+1) deduplicates to 4 options
        assert len(m.options[1]) == 4

    def test_rotation_invariance(self):
        for i in range(16):
            shifted = tuple((s, (l + i) % 16) for s, l in CMAP.options[0])
            assert CMAP.options[i] == shifted

    def test_unsupported_depth(self):
        with pytest.raises(ConfigError):
            default_connectivity(16, 4)

    def test_too_few_lanes(self):
        with pytest.raises(ConfigError):
            default_connectivity(2, 3)


class TestLevelPartition:
    def test_canonical_six_levels(self):
        assert LEVELS.groups == ((0, 5, 10), (1, 6, 11), (2, 7, 12),
                                 (3, 8, 13), (4, 9, 14), (15,))

    def test_disjointness_oracle(self):
        # oracle: explicit set intersection over the option lists
        for group in LEVELS:
            for a in group:
                for b in group:
                    if a != b:
                        assert not set(CMAP.options[a]) & set(CMAP.options[b])

    def test_single_lane_map(self):
        m = connectivity_from_pattern([(0, 0)], lanes=1, depth=1)
        assert level_partition(m).groups == ((0,),)

    def test_bad_partition_rejected(self):
        from sparsemac.scheduler import LevelPartition
        with pytest.raises(ConfigError):
            verify_partition(CMAP, LevelPartition(groups=((0, 1), tuple(range(2, 16)))))


class TestCombineZ:
    def test_both_ones(self):
        z = combine_z(np.ones((3, 16), bool), np.ones((3, 16), bool))
        assert z.all()

    def test_one_side_zero(self):
        z = combine_z(np.ones((3, 16), bool), np.zeros((3, 16), bool))
        assert not z.any()

    def test_and_semantics(self):
        az = make_z(3, 16)
        bz = make_z(3, 16)
        az[0] = [(0xFF00 >> i) & 1 for i in range(16)]
        bz[0] = [(0x0FF0 >> i) & 1 for i in range(16)]
        z = combine_z(az, bz)
        got = sum(int(z[0, i]) << i for i in range(16))
        assert got == 0x0F00

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            combine_z(np.ones((3, 16), bool), np.ones((2, 16), bool))


class TestScheduleStep:
    def test_dense_window(self):
        z = np.ones((3, 16), bool)
        schedule, z_after = schedule_step(z, CMAP, LEVELS)
        assert schedule.ms == (0,) * 16  # every lane takes its dense slot
        assert schedule.as_count == 1
        assert not z_after[0].any() and z_after[1:].all()

    def test_empty_window(self):
        z = np.zeros((3, 16), bool)
        schedule, z_after = schedule_step(z, CMAP, LEVELS)
        assert all(m is IDLE for m in schedule.ms)
        assert schedule.as_count == 3

    def test_half_clear_row0(self):
        z = np.ones((3, 16), bool)
        z[0, :8] = False
        schedule, z_after = schedule_step(z, CMAP, LEVELS)
        for lane in range(8):
            assert CMAP.options[lane][schedule.ms[lane]] == (1, lane)
        for lane in range(8, 16):
            assert CMAP.options[lane][schedule.ms[lane]] == (0, lane)
        assert schedule.as_count == 1

    def test_input_not_mutated(self):
        z = np.ones((3, 16), bool)
        schedule_step(z, CMAP, LEVELS)
        assert z.all()

    def test_matches_naive_oracle(self, rng):
        opts = [list(o) for o in CMAP.options]
        for _ in range(400):
            z = rng.random((3, 16)) < rng.uniform(0.05, 0.95)
            schedule, z_after = schedule_step(z, CMAP, LEVELS)
            ms, z_o, as_o = naive_schedule_step(z.tolist(), opts, LEVELS.groups)
            assert list(schedule.ms) == ms
            assert schedule.as_count == as_o
            np.testing.assert_array_equal(z_after, np.array(z_o))

    @given(st.integers(0, 2 ** 48 - 1))
    @settings(max_examples=300, deadline=None)
    def test_validity_and_row0_completeness(self, bits):
        z = np.array([[bool((bits >> (r * 16 + i)) & 1) for i in range(16)]
                      for r in range(3)])
        schedule, z_after = schedule_step(z, CMAP, LEVELS)
        picked = schedule.positions(CMAP)
        assert len(picked) == len(set(picked))  # no pair issued twice
        assert not z_after[0].any()             # row 0 fully consumed
        assert schedule.as_count >= 1
        # z_after differs from z exactly at the selected positions
        diff = z ^ z_after
        assert {(int(s), int(l)) for s, l in zip(*np.nonzero(diff))} == set(picked)

    def test_deterministic(self, rng):
        z = rng.random((3, 16)) < 0.4
        a = schedule_step(z, CMAP, LEVELS)
        b = schedule_step(z, CMAP, LEVELS)
        assert a[0] == b[0]
        np.testing.assert_array_equal(a[1], b[1])

    def test_disjoint_fit_drains_in_one_step(self):
        # all bits sit in distinct lanes' dense slots: one step drains all
        z = make_z(3, 16)
        z[0] = True
        schedule, z_after = schedule_step(z, CMAP, LEVELS)
        assert not z_after.any()
        assert schedule.as_count == 3


class TestAdvanceWindow:
    def test_no_advance(self):
        z = np.ones((3, 16), bool)
        np.testing.assert_array_equal(advance_window(z, [], 0), z)

    def test_full_refill_zero(self):
        z = np.ones((3, 16), bool)
        out = advance_window(z, [np.zeros(16, bool)] * 3, 3)
        assert not out.any()

    def test_shift_one(self):
        z = np.zeros((3, 16), bool)
        z[0, 0] = z[1, 1] = z[2, 2] = True
        fresh = np.zeros(16, bool)
        fresh[5] = True
        out = advance_window(z, [fresh], 1)
        assert out[0, 1] and out[1, 2] and out[2, 5]
        assert out.sum() == 3

    def test_bad_count(self):
        with pytest.raises(ValueError):
            advance_window(np.zeros((3, 16), bool), [], 4)
        with pytest.raises(ValueError):
            advance_window(np.zeros((3, 16), bool), [np.zeros(16, bool)], 2)
