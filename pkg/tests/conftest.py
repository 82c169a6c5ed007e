from __future__ import annotations

import math

import numpy as np
import pytest

from rssikit import RssiSample, Trace


def make_trace(values, interval: float = 0.1, seqs=None, base: float = 0.0) -> Trace:
    """Build a trace from raw values (optionally with explicit seqs)."""
    if seqs is None:
        seqs = range(len(values))
    samples = tuple(
        RssiSample(seq=s, t=round(s * interval, 6), rssi=base + float(v))
        for s, v in zip(seqs, values)
    )
    return Trace(samples=samples, nominal_interval=interval)


def sinusoid_trace(n: int = 2000, freq_hz: float = 0.2, rate_pps: float = 10.0,
                   amp: float = 1.0, base: float = -70.0) -> Trace:
    t = np.arange(n) / rate_pps
    return make_trace(amp * np.sin(2 * math.pi * freq_hz * t),
                      interval=1.0 / rate_pps, base=base)


@pytest.fixture
def ar2_trace():
    """Gapless AR(2) trace at 10 pps, the workhorse statistical fixture."""
    from rssikit import ar2_channel, generate_trace, profile_by_name

    radio = profile_by_name("cc2538")
    return generate_trace(ar2_channel(seed=7), radio, tx_power_dbm=0.0,
                          n_packets=5000)


@pytest.fixture
def sine_trace():
    return sinusoid_trace()
