from __future__ import annotations

import math

import numpy as np
import pytest

from rssikit import (
    ChannelModel,
    apply_loss,
    ar2_channel,
    bernoulli_loss,
    builtin_profiles,
    export_csv,
    generate_trace,
    gilbert_elliott_loss,
    profile_by_name,
    ripple_channel,
    swell_channel,
)


class TestRadioProfiles:
    def test_builtin_constants(self):
        profiles = {p.name: p for p in builtin_profiles()}
        cc2538 = profiles["cc2538"]
        assert cc2538.rate_pps == 10.0
        assert cc2538.sensitivity_dbm == -97.0
        assert cc2538.max_tx_dbm == 7.0
        assert cc2538.packet_bytes == 128
        cc1200 = profiles["cc1200"]
        assert cc1200.rate_pps == 2.0
        assert cc1200.sensitivity_dbm == -109.0
        assert cc1200.max_tx_dbm == 16.0
        assert cc1200.packet_bytes == 128

    def test_lag_unit_times_rate_is_one(self):
        for p in builtin_profiles():
            assert p.lag_unit_s * p.rate_pps == pytest.approx(1.0)

    def test_lookup(self):
        assert profile_by_name("CC2538").name == "cc2538"
        with pytest.raises(ValueError):
            profile_by_name("cc9999")


class TestChannelModel:
    def test_pure_sinusoid_bounds(self):
        ch = ChannelModel(kind="ripple", base_path_loss_db=60.0, seed=1,
                          osc_freqs_hz=(0.5,), osc_amps_db=(3.0,))
        tr = generate_trace(ch, profile_by_name("cc2538"), 7.0, 500)
        assert tr.rssi.min() >= -56.0 - 1e-9
        assert tr.rssi.max() <= -50.0 + 1e-9

    def test_seed_determinism(self):
        ch = swell_channel(seed=99)
        radio = profile_by_name("cc2538")
        a = generate_trace(ch, radio, 0.0, 1000)
        b = generate_trace(ch, radio, 0.0, 1000)
        assert np.array_equal(a.rssi, b.rssi)
        assert np.array_equal(a.t, b.t)

    def test_export_determinism(self, tmp_path):
        ch = ripple_channel(seed=4)
        radio = profile_by_name("cc2538")
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        export_csv(generate_trace(ch, radio, 0.0, 500), p1)
        export_csv(generate_trace(ch, radio, 0.0, 500), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_ar2_acf_matches_yule_walker(self):
        # Poles 0.9 exp(+-0.3j); lag-1 autocorrelation a1 / (1 - a2).
        a1 = 2 * 0.9 * math.cos(0.3)
        a2 = -0.81
        ch = ar2_channel(seed=13, a1=a1, a2=a2)
        fluct = ch.realize(5000, 10.0)
        x = fluct - fluct.mean()
        rho1 = float(np.dot(x[:-1], x[1:]) / np.dot(x, x))
        assert rho1 == pytest.approx(a1 / (1 - a2), abs=0.05)

    def test_unstable_ar_rejected(self):
        with pytest.raises(ValueError, match="unstable"):
            ar2_channel(seed=0, a1=2.0, a2=0.5)

    def test_stationarity_across_halves(self):
        for factory in (swell_channel, ripple_channel, ar2_channel):
            fluct = factory(seed=8).realize(10000, 10.0)
            a, b = fluct[:5000], fluct[5000:]
            va = float(np.mean((a - a.mean()) ** 2))
            vb = float(np.mean((b - b.mean()) ** 2))
            assert abs(va - vb) / max(va, vb) < 0.10

    def test_sensitivity_gate_drops_deep_fades(self):
        ch = ChannelModel(kind="ripple", base_path_loss_db=103.0, seed=2,
                          osc_freqs_hz=(0.5,), osc_amps_db=(3.0,))
        radio = profile_by_name("cc2538")
        tr = generate_trace(ch, radio, 7.0, 1000)
        assert len(tr) < 1000
        assert tr.rssi.min() >= radio.sensitivity_dbm
        assert tr.loss_ratio > 0

    def test_tx_power_outside_radio_limits_rejected(self):
        ch = swell_channel(seed=0)
        with pytest.raises(ValueError, match="tx_power"):
            generate_trace(ch, profile_by_name("cc2538"), 8.0, 100)

    def test_rate_sets_timestamps(self):
        ch = swell_channel(seed=0)
        tr = generate_trace(ch, profile_by_name("cc1200"), 0.0, 100)
        assert tr.nominal_interval == 0.5
        assert tr.t[1] - tr.t[0] == pytest.approx(0.5)


class TestLossModels:
    def test_bernoulli_zero_keeps_everything(self):
        tr = generate_trace(swell_channel(seed=1), profile_by_name("cc2538"), 0.0, 500)
        out = apply_loss(tr, bernoulli_loss(0.0, seed=3))
        assert out.samples == tr.samples

    def test_bernoulli_one_empties_trace(self):
        tr = generate_trace(swell_channel(seed=1), profile_by_name("cc2538"), 0.0, 500)
        out = apply_loss(tr, bernoulli_loss(1.0, seed=3))
        assert len(out) == 0

    def test_bernoulli_realized_ratio(self):
        tr = generate_trace(swell_channel(seed=6), profile_by_name("cc2538"), 0.0, 10000)
        out = apply_loss(tr, bernoulli_loss(0.3, seed=7))
        realized = 1 - len(out) / len(tr)
        assert realized == pytest.approx(0.30, abs=0.015)

    def test_survivors_untouched(self):
        tr = generate_trace(ripple_channel(seed=2), profile_by_name("cc2538"), 0.0, 1000)
        out = apply_loss(tr, bernoulli_loss(0.4, seed=5))
        by_seq = {s.seq: s for s in tr.samples}
        for s in out.samples:
            orig = by_seq[s.seq]
            assert s.rssi == orig.rssi and s.t == orig.t

    def test_gilbert_elliott_bounds_and_determinism(self):
        loss = gilbert_elliott_loss(0.05, 0.3, loss_good=0.02, loss_bad=0.8, seed=9)
        m1 = loss.keep_mask(5000)
        m2 = loss.keep_mask(5000)
        assert np.array_equal(m1, m2)
        ratio = 1 - m1.mean()
        assert 0.02 < ratio < 0.8

    def test_gilbert_elliott_bursts_more_than_bernoulli(self):
        # Same average loss, longer loss runs under the two-state chain.
        ge = gilbert_elliott_loss(0.02, 0.2, loss_good=0.0, loss_bad=1.0, seed=10)
        mask = ge.keep_mask(20000)
        avg = 1 - mask.mean()
        be = bernoulli_loss(avg, seed=10).keep_mask(20000)

        def longest_run(m):
            best = cur = 0
            for kept in m:
                cur = 0 if kept else cur + 1
                best = max(best, cur)
            return best

        assert longest_run(mask) > longest_run(be)

    def test_probability_validation(self):
        with pytest.raises(ValueError):
            bernoulli_loss(1.5)
        with pytest.raises(ValueError):
            gilbert_elliott_loss(-0.1, 0.5)

    def test_empty_trace_rejected(self):
        tr = generate_trace(swell_channel(seed=1), profile_by_name("cc2538"), 0.0, 10)
        empty = apply_loss(tr, bernoulli_loss(1.0, seed=1))
        with pytest.raises(ValueError, match="empty"):
            apply_loss(empty, bernoulli_loss(0.0, seed=1))
