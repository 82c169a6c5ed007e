"""Seeded synthetic RSSI link generator: radio profiles, water-motion-style
channel fluctuation models, and packet-loss processes.

Every generator output is a pure function of (parameters, seed), so two runs
with the same inputs produce bit-identical traces. The built-in channel
presets are tuned to *resemble* slow heaving swell and fast choppy ripple on
open water; they are calibrations for exercising the predictor at desk
scale, not claims of fidelity to any particular deployment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .trace import RssiSample, Trace

CHANNEL_KINDS = ("ar2", "swell", "ripple")
LOSS_KINDS = ("bernoulli", "gilbert_elliott")

_BURN_IN = 512


@dataclass(frozen=True)
class RadioProfile:
    """Static limits of one radio configuration.

    Attributes:
        name: Identifier, e.g. "cc2538".
        rate_pps: Sustainable packet rate, packets per second.
        sensitivity_dbm: Minimum receivable power.
        max_tx_dbm: Largest configurable transmit power.
        min_tx_dbm: Smallest configurable transmit power.
        packet_bytes: Payload size used at that rate.
    """

    name: str
    rate_pps: float
    sensitivity_dbm: float
    max_tx_dbm: float
    min_tx_dbm: float
    packet_bytes: int

    def __post_init__(self) -> None:
        if self.rate_pps <= 0:
            raise ValueError("rate_pps must be > 0")
        if self.min_tx_dbm >= self.max_tx_dbm:
            raise ValueError("min_tx_dbm must be below max_tx_dbm")
        if self.packet_bytes <= 0:
            raise ValueError("packet_bytes must be > 0")

    @property
    def lag_unit_s(self) -> float:
        """Seconds per sampling step (one prediction lag unit)."""
        return 1.0 / self.rate_pps


def builtin_profiles() -> list[RadioProfile]:
    """The two radio configurations the toolkit targets.

    The min_tx values are typical register floors, not datasheet headline
    numbers; override them via ``dataclasses.replace`` when a deployment
    differs.
    """
    return [
        RadioProfile(name="cc2538", rate_pps=10.0, sensitivity_dbm=-97.0,
                     max_tx_dbm=7.0, min_tx_dbm=-24.0, packet_bytes=128),
        RadioProfile(name="cc1200", rate_pps=2.0, sensitivity_dbm=-109.0,
                     max_tx_dbm=16.0, min_tx_dbm=-16.0, packet_bytes=128),
    ]


def profile_by_name(name: str) -> RadioProfile:
    for p in builtin_profiles():
        if p.name == name.lower():
            return p
    raise ValueError(f"unknown radio profile {name!r}")


@dataclass(frozen=True)
class ChannelModel:
    """Wide-sense stationary fluctuation process for the received power.

    Kinds:
        ar2: pure autoregressive recursion with per-step coefficients
            ``ar_coeffs`` and innovation std ``noise_std_db``.
        swell / ripple: fixed-amplitude sinusoids with seeded random phases
            plus first-order colored noise whose process std is
            ``noise_std_db`` and whose correlation time is
            ``noise_corr_time_s`` (so the per-step correlation adapts to the
            sampling rate).

    Stationarity is ensured by construction: AR recursions must be stable
    and sinusoid amplitudes are fixed.
    """

    kind: str
    base_path_loss_db: float
    seed: int
    osc_freqs_hz: tuple[float, ...] = ()
    osc_amps_db: tuple[float, ...] = ()
    ar_coeffs: tuple[float, ...] = ()
    noise_std_db: float = 0.0
    noise_corr_time_s: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if len(self.osc_freqs_hz) != len(self.osc_amps_db):
            raise ValueError("oscillation frequencies and amplitudes must pair up")
        if any(f < 0 for f in self.osc_freqs_hz) or any(a < 0 for a in self.osc_amps_db):
            raise ValueError("oscillation parameters must be non-negative")
        if self.noise_std_db < 0 or self.noise_corr_time_s < 0:
            raise ValueError("noise parameters must be non-negative")
        if self.kind == "ar2":
            if not self.ar_coeffs:
                raise ValueError("ar2 channel requires ar_coeffs")
            roots = np.roots(np.concatenate(([1.0], -np.asarray(self.ar_coeffs))))
            if np.any(np.abs(roots) >= 1.0):
                raise ValueError(f"unstable AR parameters {self.ar_coeffs}")

    def realize(self, n_samples: int, rate_pps: float) -> np.ndarray:
        """Deterministic fluctuation series (dB around the mean path)."""
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if rate_pps <= 0:
            raise ValueError("rate_pps must be > 0")
        rng = np.random.default_rng(self.seed)
        t = np.arange(n_samples) / rate_pps

        x = np.zeros(n_samples)
        for f, a in zip(self.osc_freqs_hz, self.osc_amps_db):
            phase = rng.uniform(0.0, 2.0 * math.pi)
            x += a * np.sin(2.0 * math.pi * f * t + phase)

        if self.kind == "ar2":
            w = rng.standard_normal(n_samples + _BURN_IN) * self.noise_std_db
            den = np.concatenate(([1.0], -np.asarray(self.ar_coeffs)))
            x += lfilter([1.0], den, w)[_BURN_IN:]
        elif self.noise_std_db > 0:
            dt = 1.0 / rate_pps
            phi = math.exp(-dt / self.noise_corr_time_s) if self.noise_corr_time_s > 0 else 0.0
            innov = self.noise_std_db * math.sqrt(1.0 - phi * phi)
            w = rng.standard_normal(n_samples + _BURN_IN) * innov
            x += lfilter([1.0], [1.0, -phi], w)[_BURN_IN:]

        return x


def swell_channel(seed: int = 0, base_path_loss_db: float = 60.0) -> ChannelModel:
    """Long, large waves: slow high-amplitude heave with persistent noise."""
    return ChannelModel(
        kind="swell",
        base_path_loss_db=base_path_loss_db,
        seed=seed,
        osc_freqs_hz=(0.09, 0.038),
        osc_amps_db=(3.5, 1.5),
        noise_std_db=0.3,
        noise_corr_time_s=3.0,
    )


def ripple_channel(seed: int = 0, base_path_loss_db: float = 60.0) -> ChannelModel:
    """Short, rapid oscillation: faster, lower-amplitude chop."""
    return ChannelModel(
        kind="ripple",
        base_path_loss_db=base_path_loss_db,
        seed=seed,
        osc_freqs_hz=(0.8,),
        osc_amps_db=(1.5,),
        noise_std_db=0.3,
        noise_corr_time_s=0.4,
    )


def ar2_channel(seed: int = 0, a1: float = 1.6, a2: float = -0.81,
                noise_std_db: float = 1.0,
                base_path_loss_db: float = 60.0) -> ChannelModel:
    """Second-order autoregressive fluctuation (damped pseudo-periodic)."""
    return ChannelModel(
        kind="ar2",
        base_path_loss_db=base_path_loss_db,
        seed=seed,
        ar_coeffs=(a1, a2),
        noise_std_db=noise_std_db,
    )


def channel_by_name(name: str, seed: int = 0,
                    base_path_loss_db: float = 60.0) -> ChannelModel:
    factory = {"swell": swell_channel, "ripple": ripple_channel,
               "ar2": ar2_channel}.get(name.lower())
    if factory is None:
        raise ValueError(f"unknown channel kind {name!r}")
    return factory(seed=seed, base_path_loss_db=base_path_loss_db)


@dataclass(frozen=True)
class LossModel:
    """Stochastic ACK/packet loss process.

    Kinds:
        bernoulli: independent loss with probability ``p``.
        gilbert_elliott: two-state good/bad Markov chain; ``p_good_to_bad``
            and ``p_bad_to_good`` are per-step transition probabilities,
            ``loss_good``/``loss_bad`` the loss probabilities inside each
            state. The chain starts in the good state.
    """

    kind: str
    seed: int
    p: float = 0.0
    p_good_to_bad: float = 0.0
    p_bad_to_good: float = 0.0
    loss_good: float = 0.0
    loss_bad: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        for name in ("p", "p_good_to_bad", "p_bad_to_good", "loss_good", "loss_bad"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    def keep_mask(self, n: int) -> np.ndarray:
        """Boolean survival mask for n consecutive packets (True = kept)."""
        rng = np.random.default_rng(self.seed)
        if n == 0:
            return np.zeros(0, dtype=bool)
        u = rng.random(n)
        if self.kind == "bernoulli":
            return u >= self.p
        v = rng.random(n)
        keep = np.empty(n, dtype=bool)
        bad = False
        for i in range(n):
            keep[i] = u[i] >= (self.loss_bad if bad else self.loss_good)
            if bad:
                bad = v[i] >= self.p_bad_to_good
            else:
                bad = v[i] < self.p_good_to_bad
        return keep


def bernoulli_loss(p: float, seed: int = 0) -> LossModel:
    return LossModel(kind="bernoulli", seed=seed, p=p)


def gilbert_elliott_loss(p_good_to_bad: float, p_bad_to_good: float,
                         loss_good: float = 0.0, loss_bad: float = 1.0,
                         seed: int = 0) -> LossModel:
    return LossModel(kind="gilbert_elliott", seed=seed,
                     p_good_to_bad=p_good_to_bad, p_bad_to_good=p_bad_to_good,
                     loss_good=loss_good, loss_bad=loss_bad)


def generate_trace(channel: ChannelModel, radio: RadioProfile,
                   tx_power_dbm: float, n_packets: int) -> Trace:
    """Synthesize the receiver-side record of a fixed-power transmission.

    Received power is tx_power - base_path_loss + fluctuation, sampled at
    the radio's packet rate and rounded to the trace schema's 0.01 dB
    precision. Packets whose received power falls below the radio's
    sensitivity are dropped deterministically (they were never received),
    which layers under any stochastic LossModel applied afterwards.
    """
    if n_packets < 1:
        raise ValueError("n_packets must be >= 1")
    if not radio.min_tx_dbm <= tx_power_dbm <= radio.max_tx_dbm:
        raise ValueError(
            f"tx_power {tx_power_dbm} dBm outside [{radio.min_tx_dbm}, "
            f"{radio.max_tx_dbm}] for {radio.name}"
        )
    fluct = channel.realize(n_packets, radio.rate_pps)
    rssi = np.round(tx_power_dbm - channel.base_path_loss_db + fluct, 2)
    step = radio.lag_unit_s
    samples = tuple(
        RssiSample(seq=k, t=round(k * step, 6), rssi=float(rssi[k]),
                   tx_power=tx_power_dbm)
        for k in range(n_packets)
        if rssi[k] >= radio.sensitivity_dbm
    )
    meta = {
        "radio": radio.name,
        "channel": channel.kind,
        "seed": channel.seed,
        "tx_power_dbm": tx_power_dbm,
        "base_path_loss_db": channel.base_path_loss_db,
    }
    return Trace(samples=samples, nominal_interval=step, meta=meta)


def apply_loss(trace: Trace, loss: LossModel) -> Trace:
    """Remove samples according to the loss process.

    Survivors keep their seq, t and rssi untouched, so gaps appear exactly
    where packets were lost. May return an empty trace (total loss);
    downstream operations raise their own precondition errors then.
    """
    if not trace.samples:
        raise ValueError("trace is empty")
    keep = loss.keep_mask(len(trace))
    samples = tuple(s for s, k in zip(trace.samples, keep) if k)
    meta = dict(trace.meta)
    meta["loss"] = loss.kind
    meta["loss_seed"] = loss.seed
    return Trace(samples=samples, nominal_interval=trace.nominal_interval, meta=meta)
