"""Effort policies, partner selection, the session loop and reformation rates."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdpl.errors import ValidationError
from pdpl.sim import (
    STREAMS,
    EffortPolicy,
    SimConfig,
    mean_payoff_by_policy,
    policy_step,
    reformation_rates,
    reformation_rates_from_pairs,
    select_partners,
    simulate,
    summary,
)


def same_trace(a, b):
    if a.students != b.students or len(a.sessions) != len(b.sessions):
        return False
    for s, t in zip(a.sessions, b.sessions):
        if s != t:
            return False
    gb, hb = a.gradebook, b.gradebook
    return all(
        np.array_equal(getattr(gb, k), getattr(hb, k), equal_nan=True) for k in ("pre", "post", "sheet")
    ) and (gb.partner == hb.partner).all()


class TestPolicies:
    def test_fixed_policies(self):
        assert policy_step(EffortPolicy("always_low"), [2, 2]) == 0.0
        assert policy_step(EffortPolicy("always_high"), [0]) == 2.0

    def test_tit_for_tat(self):
        tft = EffortPolicy("tit_for_tat", threshold=1.0)
        assert policy_step(tft, []) == 2.0
        assert policy_step(tft, [0, 1.0]) == 2.0
        assert policy_step(tft, [2, 0.5]) == 0.0

    def test_grim(self):
        g = EffortPolicy("grim")
        assert policy_step(g, []) == 2.0
        assert policy_step(g, [2, 2]) == 2.0
        assert policy_step(g, [2, 2, 1.5]) == 0.0
        assert policy_step(g, [1.5, 2, 2]) == 0.0

    def test_random_uses_rng(self):
        pol = EffortPolicy("random", p_high=0.3)
        r = np.random.default_rng(0)
        draws = [policy_step(pol, [], r) for _ in range(4000)]
        assert set(draws) == {0.0, 2.0}
        assert abs(np.mean(np.array(draws) == 2.0) - 0.3) < 4 * math.sqrt(0.21 / 4000)
        with pytest.raises(ValueError):
            policy_step(pol, [])

    @pytest.mark.parametrize("text, expected", [
        ("always_high", EffortPolicy("always_high")),
        ("tit_for_tat:1.5", EffortPolicy("tit_for_tat", threshold=1.5)),
        ("random:0.25", EffortPolicy("random", p_high=0.25)),
        ("GRIM", EffortPolicy("grim")),
    ])
    def test_parse(self, text, expected):
        assert EffortPolicy.parse(text) == expected
        assert EffortPolicy.parse(str(expected)) == expected

    @pytest.mark.parametrize("bad", ["lazy", "always_low:1", "random:x"])
    def test_parse_errors(self, bad):
        with pytest.raises(ValidationError):
            EffortPolicy.parse(bad)

    @pytest.mark.parametrize("kwargs", [dict(kind="tit_for_tat", threshold=3), dict(kind="random", p_high=1.5)])
    def test_ranges(self, kwargs):
        with pytest.raises(ValidationError):
            EffortPolicy(**kwargs)


class TestSelectPartners:
    ids = [f"s{i}" for i in range(1, 9)]

    def test_full_stickiness_repeats(self):
        prev = [("s1", "s2"), ("s3", "s4"), ("s5", "s6"), ("s7", "s8")]
        payoffs = {s: 0.4 for s in self.ids}
        pairs, left = select_partners(prev, payoffs, self.ids, 1.0, np.random.default_rng(1))
        assert pairs == prev and left is None

    def test_negative_payoff_breaks_pair(self):
        prev = [("s1", "s2"), ("s3", "s4")]
        payoffs = {"s1": -0.8, "s2": 1.2, "s3": 0.4, "s4": 0.4}
        kept_12 = 0
        for seed in range(200):
            pairs, _ = select_partners(prev, payoffs, self.ids[:4], 1.0, np.random.default_rng(seed))
            assert ("s3", "s4") in pairs
            kept_12 += ("s1", "s2") in pairs
        # s1 and s2 can only meet again through the random matching of the rest
        assert kept_12 == 200

    def test_zero_stickiness_uniform(self):
        counts = {}
        for seed in range(3000):
            pairs, _ = select_partners([("s1", "s2")], {"s1": 1, "s2": 1}, self.ids[:4], 0.0,
                                       np.random.default_rng(seed))
            key = tuple(pairs)
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 3
        for c in counts.values():
            assert abs(c / 3000 - 1 / 3) < 4 * math.sqrt(2 / 9 / 3000)

    def test_five_students(self):
        for seed in range(1000):
            pairs, left = select_partners([], {}, self.ids[:5], 0.5, np.random.default_rng(seed))
            assert len(pairs) == 2 and left is not None
            assert sorted([s for p in pairs for s in p] + [left]) == self.ids[:5]

    def test_absent_partner_dissolves_pair(self):
        pairs, left = select_partners([("s1", "s2")], {"s1": 1, "s2": 1}, ["s1", "s3", "s4"], 1.0,
                                      np.random.default_rng(0))
        assert len(pairs) == 1 and left is not None

    def test_empty_presence(self):
        with pytest.raises(ValueError):
            select_partners([], {}, [], 0.5, np.random.default_rng(0))


class TestSimConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(n_students=1), dict(n_sessions=0), dict(absence_prob=1.0), dict(stickiness=1.2),
        dict(beta=-0.1), dict(noise_sd=-1), dict(seed=-1), dict(n_students=3, policies=("grim",)),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            SimConfig(**kwargs)

    def test_policy_forms(self):
        assert SimConfig(n_students=3, policies="grim").policies == (EffortPolicy("grim"),) * 3
        cfg = SimConfig(n_students=2, policies=["always_low", EffortPolicy("always_high")])
        assert [p.kind for p in cfg.policies] == ["always_low", "always_high"]

    def test_default_mix_is_mostly_cooperative(self):
        kinds = [p.kind for p in SimConfig(n_students=100).policies]
        assert kinds.count("always_high") == 50 and kinds.count("always_low") == 10

    def test_student_ids(self):
        assert SimConfig(n_students=3).student_ids() == ["s001", "s002", "s003"]
        assert SimConfig(n_students=1200).student_ids()[-1] == "s1200"


class TestSimulate:
    def test_deterministic(self):
        cfg = SimConfig(n_students=25, seed=99)
        assert same_trace(simulate(cfg), simulate(cfg))

    def test_seed_changes_trace(self):
        assert not same_trace(simulate(SimConfig(seed=1)), simulate(SimConfig(seed=2)))

    def test_closed_form_all_high_no_noise(self):
        cfg = SimConfig(n_students=20, absence_prob=0.0, policies="always_high", beta=0.2, noise_sd=0.0, seed=4)
        gb = simulate(cfg).gradebook
        assert not np.isnan(gb.pre).any()
        np.testing.assert_allclose(gb.post, np.clip(gb.pre + 0.4, 0, 2), atol=1e-15)

    def test_smallest_case(self):
        tr = simulate(SimConfig(n_students=2, n_sessions=1, absence_prob=0.0))
        assert len(tr.sessions) == 1 and tr.sessions[0].pairs == (("s001", "s002"),)

    def test_absent_cells_missing_together(self):
        gb = simulate(SimConfig(n_students=40, absence_prob=0.3, seed=5)).gradebook
        miss = np.isnan(gb.pre)
        assert miss.any()
        assert (np.isnan(gb.post) == miss).all() and (np.isnan(gb.sheet) == miss).all()
        assert (~miss == gb.attended).all()

    def test_free_rider_payoffs(self):
        cfg = SimConfig(n_students=2, n_sessions=7, absence_prob=0.0, policies=("always_low", "always_high"))
        for s in simulate(cfg).sessions:
            assert s.payoffs["s001"] == 1.2 and s.payoffs["s002"] == -0.8

    def test_cooperation_beats_defection(self):
        def total(policy):
            tr = simulate(SimConfig(n_students=10, absence_prob=0.0, policies=policy))
            return sum(sum(s.payoffs.values()) for s in tr.sessions)

        assert total("always_high") == pytest.approx(10 * 7 * 0.4) and total("always_low") == 0.0

    def test_no_noise_never_loses(self):
        tr = simulate(SimConfig(n_students=31, noise_sd=0.0, seed=8))
        gb = tr.gradebook
        obs = ~np.isnan(gb.pre)
        assert (gb.post[obs] >= gb.pre[obs]).all()

    def test_unpaired_student_learns_from_own_grade(self):
        cfg = SimConfig(n_students=3, n_sessions=1, absence_prob=0.0, policies="always_high", noise_sd=0.0)
        s = simulate(cfg).sessions[0]
        assert s.unpaired is not None and s.unpaired not in s.scores
        assert s.post[s.unpaired] == pytest.approx(min(s.pre[s.unpaired] + 0.4, 2.0))

    def test_adding_students_keeps_absence_draws(self):
        small = simulate(SimConfig(n_students=10, seed=3)).gradebook
        big = simulate(SimConfig(n_students=14, seed=3)).gradebook
        np.testing.assert_array_equal(np.isnan(small.pre), np.isnan(big.pre[:10]))
        obs = ~np.isnan(small.pre)
        np.testing.assert_array_equal(small.pre[obs], big.pre[:10][obs])

    def test_stream_codes_distinct(self):
        assert len(set(STREAMS.values())) == len(STREAMS)


class TestReformation:
    def test_hand_enumeration(self):
        hist = [[("s1", "s2"), ("s3", "s4")], [("s1", "s3"), ("s2", "s4")], [("s1", "s2"), ("s3", "s4")]]
        assert reformation_rates_from_pairs(hist) == [0.0, 100.0]
        assert reformation_rates_from_pairs(hist, since="previous") == [0.0, 0.0]

    def test_full_stickiness(self):
        tr = simulate(SimConfig(n_students=20, absence_prob=0.0, stickiness=1.0, policies="always_high"))
        assert reformation_rates(tr) == [100.0] * 6

    def test_two_students(self):
        tr = simulate(SimConfig(n_students=2, absence_prob=0.0, stickiness=0.0))
        assert reformation_rates(tr) == [100.0] * 6

    def test_empty_session_is_nan(self):
        rates = reformation_rates_from_pairs([[("a", "b")], [], [("a", "b")]])
        assert math.isnan(rates[0]) and rates[1] == 100.0

    def test_bad_since(self):
        with pytest.raises(ValueError):
            reformation_rates_from_pairs([[]], since="ever")

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6), st.floats(0, 1))
    def test_rates_are_percentages(self, seed, stick):
        tr = simulate(SimConfig(n_students=12, stickiness=stick, seed=seed))
        prev = reformation_rates(tr, "previous")
        for any_rate, prev_rate in zip(reformation_rates(tr), prev):
            if not math.isnan(any_rate):
                assert 0.0 <= prev_rate <= any_rate <= 100.0


class TestSummary:
    def test_fields(self):
        tr = simulate(SimConfig(n_students=10, seed=2))
        out = summary(tr)
        assert out["seed"] == 2 and len(out["reformation_rates_any"]) == 6
        assert set(out["mean_payoff_by_policy"]) <= {str(p) for p in tr.config.policies}
        assert 0.0 <= out["missing_fraction"] <= 1.0

    def test_mean_payoff_by_policy(self):
        cfg = SimConfig(n_students=2, absence_prob=0.0, policies=("always_low", "always_high"))
        assert mean_payoff_by_policy(simulate(cfg)) == pytest.approx({"always_high": -0.8, "always_low": 1.2}, abs=1e-15)
