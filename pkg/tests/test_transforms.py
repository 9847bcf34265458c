"""Deterministic transforms: reversal maps, excisions, clocks, records."""

import numpy as np
import pytest

from excise import (Path, RngStream, TimeGrid, brownian_scale, excise_bridge,
                    excise_meander, excise_to_level, excursion_margin, g_br,
                    g_me, regularity_check, sample_bm, sample_bridge, t_br,
                    t_me, two_sided_max)

GRID = TimeGrid(1.0, 512)


class TestTwoSidedMax:
    def test_tent_envelope_is_itself(self, tent_bridge):
        env = two_sided_max(tent_bridge)
        assert np.array_equal(env.values, tent_bridge.values)

    def test_w_bridge_envelope(self, w_bridge):
        # [DERIVED: hand envelope of the W bridge; forward max up to the
        # argmax at 0.75, backward max after it]
        env = two_sided_max(w_bridge)
        assert np.array_equal(env.values, [0.0, 0.4, 0.4, 0.5, 0.0])

    def test_envelope_dominates(self):
        p = sample_bridge(GRID, RngStream(51, 0))
        env = two_sided_max(p)
        assert np.all(env.values >= p.values)


class TestReversalMaps:
    def test_tent_maps_to_ramp(self, tent_bridge):
        # [DERIVED: reflecting the falling half of the tent gives the ramp
        # climbing to twice the max]
        m = t_me(tent_bridge)
        assert m.kind == "meander_type"
        assert np.array_equal(m.times, [0.0, 0.5, 1.0])
        assert np.array_equal(m.values, [0.0, 0.5, 1.0])

    def test_ramp_maps_back_to_tent(self, tent_bridge):
        back = t_br(t_me(tent_bridge))
        assert np.allclose(back.times, tent_bridge.times)
        assert np.allclose(back.values, tent_bridge.values)

    def test_round_trip_on_sampled_bridges(self):
        # [DERIVED: t_br inverts t_me pathwise]
        for i in range(25):
            p = sample_bridge(GRID, RngStream(53, i))
            q = t_br(t_me(p))
            assert np.allclose(q.times, p.times, atol=1e-12)
            assert np.allclose(q.values, p.values, atol=1e-12)

    def test_t_me_terminal_is_twice_max(self, w_bridge):
        m = t_me(w_bridge)
        assert m.values[-1] == pytest.approx(1.0)
        assert m.values[-1] == m.values.max()

    def test_t_me_rejects_non_bridge(self):
        p = Path(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            t_me(p)

    def test_t_br_rejects_non_meander(self, tent_bridge):
        with pytest.raises(ValueError):
            t_br(tent_bridge)


class TestBrownianScale:
    def test_identity_on_unit_horizon(self, tent_bridge):
        assert brownian_scale(tent_bridge) is tent_bridge

    def test_scaling_law(self):
        # a tent on [0, 0.25] with height h maps to height 2h on [0, 1]
        p = Path(np.array([0.0, 0.125, 0.25]), np.array([0.0, 0.3, 0.0]),
                 "bridge")
        q = brownian_scale(p)
        assert q.horizon == 1.0
        assert q.values[1] == pytest.approx(0.6)
        assert q.times[1] == pytest.approx(0.5)

    def test_level_rescales(self):
        p = Path(np.array([0.0, 0.2, 0.25]), np.array([0.0, 0.1, 0.5]),
                 "first_passage", level=0.5)
        q = brownian_scale(p)
        assert q.level == pytest.approx(1.0)


class TestExciseBridge:
    def test_six_node_fixture_exact(self, six_node_bridge):
        # [DERIVED: the excursion on (0.1, 0.3) below envelope level 0.5
        # touches 0 and is excised; tau = 1 - 0.2 = 0.8]
        out = excise_bridge(six_node_bridge)
        assert out.tau == pytest.approx(0.8)
        assert out.argmax_time == 0.5
        assert np.allclose(out.excised.times, [0.0, 0.1, 0.3, 0.8])
        assert np.allclose(out.excised.values, [0.0, 0.5, 1.0, 0.0])
        assert out.excised_length == pytest.approx(0.2)
        assert len(out.records) == 1
        r = out.records[0]
        assert (r.g, r.d, r.level) == (0.1, 0.3, 0.5)
        assert r.excised and r.min_value == 0.0

    def test_w_bridge_keeps_positive_excursion(self, w_bridge):
        # [DERIVED: the dip to 0.1 on (0.25, 0.75) stays above 0, kept]
        out = excise_bridge(w_bridge)
        assert out.tau == 1.0
        assert len(out.records) == 1
        assert not out.records[0].excised
        assert np.array_equal(out.excised.values, w_bridge.values)

    def test_tent_has_no_excursions(self, tent_bridge):
        out = excise_bridge(tent_bridge)
        assert out.records == []
        assert out.tau == 1.0

    def test_clock_monotone_and_consistent(self, six_node_bridge):
        out = excise_bridge(six_node_bridge)
        u = out.clock.u
        assert np.all(np.diff(u) >= 0.0)
        assert u[-1] == pytest.approx(out.tau)
        # alpha maps output nodes back to their source times; the glue
        # point at d = 0.3 represents the whole excised interval
        assert np.allclose(out.clock.alpha_times, [0.0, 0.3, 0.5, 1.0])

    def test_sampled_bridge_invariants(self):
        for i in range(10):
            p = sample_bridge(GRID, RngStream(57, i))
            out = excise_bridge(p)
            assert 0.0 < out.tau <= 1.0
            assert out.tau + out.excised_length == pytest.approx(1.0)
            q = out.excised
            assert q.kind == "bridge"
            assert q.values.max() == p.values.max()
            # every excised record reaches the threshold, kept ones do not
            for r in out.records:
                assert r.excised == (r.min_value <= 0.0)

    def test_g_br_unit_horizon(self):
        p = sample_bridge(GRID, RngStream(59, 0))
        q = g_br(p)
        assert q.horizon == 1.0
        assert q.kind == "bridge"


class TestExciseMeander:
    def test_hand_fixture(self, meander_fixture):
        # [DERIVED: gamma_half = 0.2; the excursion on (0.3, 0.5) dips to
        # 0.45 <= end/2 = 0.5 and is excised; tau = 0.8]
        out = excise_meander(meander_fixture)
        assert out.tau == pytest.approx(0.8)
        assert np.allclose(out.excised.times, [0.0, 0.2, 0.3, 0.8])
        assert np.allclose(out.excised.values, [0.0, 0.5, 0.8, 1.0])
        assert len(out.records) == 1
        assert out.records[0].phase == "post"
        assert out.records[0].excised

    def test_commutes_with_bridge_excision(self):
        # [DERIVED: excising then reversing equals reversing then excising]
        for i in range(10):
            p = sample_bridge(GRID, RngStream(61, i))
            a = t_me(excise_bridge(p).excised)
            b = excise_meander(t_me(p)).excised
            assert np.allclose(a.times, b.times, atol=1e-12)
            assert np.allclose(a.values, b.values, atol=1e-12)

    def test_g_me_unit_horizon(self):
        p = t_me(sample_bridge(GRID, RngStream(63, 0)))
        q = g_me(p)
        assert q.horizon == 1.0


class TestExciseToLevel:
    def test_ramp_degenerates(self):
        ramp = Path(np.array([0.0, 2.0]), np.array([0.0, 2.0]))
        out = excise_to_level(ramp, 1.0)
        assert out.tau == pytest.approx(1.0)
        assert out.records == []
        assert out.excised.kind == "first_passage"
        assert out.excised.values[-1] == 1.0

    def test_truncates_at_interpolated_passage(self):
        p = Path(np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 0.0]))
        out = excise_to_level(p, 1.0)
        assert out.argmax_time == pytest.approx(0.5)
        assert out.excised.times[-1] == pytest.approx(0.5)

    def test_phases_and_thresholds(self):
        # [DERIVED: dip to -0.1 before the x/2 passage fires at threshold 0;
        # dip to 0.4 < 0.5 after it fires at threshold x/2]
        t = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        v = np.array([0.0, 0.2, -0.1, 0.6, 0.4, 0.8, 1.0])
        out = excise_to_level(Path(t, v), 1.0)
        assert len(out.records) == 2
        first, second = out.records
        assert first.phase == "pre_half" and first.excised
        assert second.phase == "post" and second.excised
        assert out.tau + out.excised_length == pytest.approx(6.0)

    def test_unreached_level_raises(self):
        p = Path(np.array([0.0, 1.0]), np.array([0.0, 0.5]))
        with pytest.raises(ValueError):
            excise_to_level(p, 2.0)

    def test_sampled_path(self):
        p = sample_bm(TimeGrid(16.0, 8192), RngStream(67, 3))
        if p.values.max() < 1.0:
            pytest.skip("level unreached in this draw")
        out = excise_to_level(p, 1.0)
        q = out.excised
        assert q.level == 1.0
        assert q.values[-1] == 1.0
        assert np.all(q.values[:-1] < 1.0)


class TestRegularity:
    def test_sampled_bridges_regular(self):
        for i in range(20):
            p = sample_bridge(GRID, RngStream(71, i))
            assert regularity_check(p) == []

    def test_detects_argmax_tie(self):
        p = Path(np.array([0.0, 0.25, 0.5, 0.75, 1.0]),
                 np.array([0.0, 0.5, 0.2, 0.5, 0.0]), "bridge")
        kinds = {k for k, _ in regularity_check(p)}
        assert "prefix_argmax_tie" in kinds or "suffix_argmax_tie" in kinds

    def test_detects_interior_zero(self):
        p = Path(np.array([0.0, 0.25, 0.5, 0.75, 1.0]),
                 np.array([0.0, 0.5, 0.0, 0.6, 0.0]), "bridge")
        assert ("interior_zero_local_min", 2) in regularity_check(p)

    def test_margin_positive_for_fixture(self, w_bridge):
        out = excise_bridge(w_bridge)
        assert excursion_margin(out) == pytest.approx(0.1)
