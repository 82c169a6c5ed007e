"""Closed-loop adaptive transmission power control tolerant of lost ACKs.

On every acknowledged packet the controller measures the path gain
(received power minus the transmit power that produced it, assuming a
symmetric channel) and sets the next transmit power so the receiver sees
threshold + margin. When an ACK is lost, the controller predicts the path
gain forward from the last real anchor instead of freezing or blindly
ramping; after too many consecutive losses prediction confidence is
exhausted and it falls back to maximum power.

The controller models and predicts the *path gain* series rather than raw
received power: the gain is invariant to the controller's own power
decisions, so it stays wide-sense stationary while the loop actively
flattens the received power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linksim import ChannelModel, LossModel, RadioProfile
from .predictor import (
    METHOD_ORTHONORMAL,
    METHOD_SIMPLIFIED,
    SlidingWindowPredictor,
    predict,
)

MODE_TRACKING = "tracking"
MODE_FALLBACK = "fallback"


@dataclass(frozen=True)
class AtpcConfig:
    """Controller parameters.

    Attributes:
        radio: Radio limits the emitted power is clamped to.
        threshold_dbm: Target floor for the receiver-side power.
        margin_db: Headroom above the threshold the loop aims for.
        max_missed_acks: Consecutive losses tolerated before falling back
            to maximum power.
        predictor_method: orthonormal (statistical, refit from a sliding
            window) or simplified (pure slope extrapolation).
        window / refit_every / min_fit_samples: Sliding-window refit cadence
            for the statistical predictor.
    """

    radio: RadioProfile
    threshold_dbm: float
    margin_db: float = 3.0
    max_missed_acks: int = 5
    predictor_method: str = METHOD_ORTHONORMAL
    window: int = 512
    refit_every: int = 64
    min_fit_samples: int = 64

    def __post_init__(self) -> None:
        if self.threshold_dbm < self.radio.sensitivity_dbm:
            raise ValueError("threshold below radio sensitivity is unreachable")
        if self.margin_db < 0:
            raise ValueError("margin_db must be >= 0")
        if self.max_missed_acks < 1:
            raise ValueError("max_missed_acks must be >= 1")
        if self.predictor_method not in (METHOD_ORTHONORMAL, METHOD_SIMPLIFIED):
            raise ValueError(f"unsupported predictor method {self.predictor_method!r}")


@dataclass(frozen=True)
class AtpcState:
    """Immutable snapshot of the controller between events."""

    last_tx_dbm: float
    consecutive_missed: int = 0
    path_gain_estimate_db: float | None = None
    mode: str = MODE_TRACKING
    headroom_insufficient: bool = False


class AtpcController:
    """Single-owner state machine driven by ack / missed-ack events.

    Each event returns the transmit power for the next packet; ``state``
    exposes a snapshot that may be read concurrently.
    """

    def __init__(self, config: AtpcConfig, initial_tx_dbm: float | None = None):
        self.config = config
        tx0 = config.radio.max_tx_dbm if initial_tx_dbm is None else initial_tx_dbm
        self._state = AtpcState(last_tx_dbm=self._clamp(tx0))
        # Prediction horizons 1..max_missed-1; at max_missed the controller
        # stops predicting and falls back.
        lags = tuple(range(1, config.max_missed_acks)) or (1,)
        self._window = SlidingWindowPredictor(
            method=config.predictor_method,
            lags=lags,
            step_s=config.radio.lag_unit_s,
            window=config.window,
            refit_every=config.refit_every,
            min_samples=config.min_fit_samples,
        )
        self._tick = 0
        self.last_prediction_dbm: float | None = None

    @property
    def state(self) -> AtpcState:
        return self._state

    @property
    def current_tx_dbm(self) -> float:
        return self._state.last_tx_dbm

    def _clamp(self, tx: float) -> float:
        r = self.config.radio
        return min(max(tx, r.min_tx_dbm), r.max_tx_dbm)

    def _decide(self, gain_db: float) -> tuple[float, bool]:
        required = self.config.threshold_dbm + self.config.margin_db - gain_db
        return self._clamp(required), required > self.config.radio.max_tx_dbm

    def on_ack(self, ack_rssi_dbm: float) -> float:
        """Process a received ACK; returns the next transmit power."""
        if not math.isfinite(ack_rssi_dbm):
            raise ValueError("ack_rssi must be finite")
        gain = ack_rssi_dbm - self._state.last_tx_dbm
        self._window.observe(self._tick, gain)
        self._tick += 1
        next_tx, insufficient = self._decide(gain)
        self._state = AtpcState(
            last_tx_dbm=next_tx,
            consecutive_missed=0,
            path_gain_estimate_db=gain,
            mode=MODE_TRACKING,
            headroom_insufficient=insufficient,
        )
        self.last_prediction_dbm = None
        return next_tx

    def on_missed_ack(self) -> float:
        """Process a lost ACK; returns the next transmit power.

        Bridges the gap by predicting the path gain n steps past the last
        anchor, where n is the current run of consecutive losses. Exhausted
        confidence (n reaching max_missed_acks), missing statistics or a
        missing anchor all force the safe extreme: maximum power.
        """
        self._tick += 1
        n = self._state.consecutive_missed + 1
        prev = self._state

        anchor = self._window.anchor()
        model = self._window.model_for(n) if anchor is not None else None
        if n >= self.config.max_missed_acks or anchor is None or model is None:
            self._state = AtpcState(
                last_tx_dbm=self.config.radio.max_tx_dbm,
                consecutive_missed=n,
                path_gain_estimate_db=prev.path_gain_estimate_db,
                mode=MODE_FALLBACK,
                headroom_insufficient=False,
            )
            self.last_prediction_dbm = None
            return self.config.radio.max_tx_dbm

        t_a, gain_a, slope_a = anchor
        predicted_gain = predict(model, gain_a, slope_a, n_steps=n, anchor_t=t_a).value
        # Receiver-side power the lost packet would have produced.
        self.last_prediction_dbm = predicted_gain + prev.last_tx_dbm
        next_tx, insufficient = self._decide(predicted_gain)
        self._state = AtpcState(
            last_tx_dbm=next_tx,
            consecutive_missed=n,
            path_gain_estimate_db=predicted_gain,
            mode=MODE_TRACKING,
            headroom_insufficient=insufficient,
        )
        return next_tx


@dataclass(frozen=True)
class LoopRecord:
    """Per-packet outcome of a simulated control loop."""

    seq: int
    tx_dbm: float
    rssi_dbm: float
    delivered: bool
    predicted_dbm: float | None
    mode: str


@dataclass(frozen=True)
class LoopResult:
    """Transcript of one closed-loop run plus summary statistics."""

    records: tuple[LoopRecord, ...]
    threshold_dbm: float

    @property
    def n_packets(self) -> int:
        return len(self.records)

    @property
    def delivered_count(self) -> int:
        return sum(1 for r in self.records if r.delivered)

    @property
    def mean_tx_dbm(self) -> float:
        return float(np.mean([r.tx_dbm for r in self.records]))

    @property
    def delivered_above_threshold(self) -> float:
        """Fraction of delivered packets received at or above threshold."""
        got = [r for r in self.records if r.delivered]
        if not got:
            return float("nan")
        return sum(1 for r in got if r.rssi_dbm >= self.threshold_dbm) / len(got)


def run_closed_loop(channel: ChannelModel, config: AtpcConfig, n_packets: int,
                    loss: LossModel | None = None,
                    forced_ack_loss: frozenset[int] | set[int] = frozenset(),
                    initial_tx_dbm: float | None = None) -> LoopResult:
    """Drive the controller against a synthetic channel.

    A packet is delivered when its received power clears the radio's
    sensitivity and the loss process keeps it; only delivered packets
    produce ACKs. ``forced_ack_loss`` additionally suppresses the ACKs of
    chosen sequence numbers (for deterministic burst experiments).
    """
    radio = config.radio
    gains = channel.realize(n_packets, radio.rate_pps) - channel.base_path_loss_db
    keep = loss.keep_mask(n_packets) if loss is not None else np.ones(n_packets, dtype=bool)

    ctrl = AtpcController(config, initial_tx_dbm=initial_tx_dbm)
    tx = ctrl.current_tx_dbm
    records = []
    for k in range(n_packets):
        rssi = tx + gains[k]
        delivered = rssi >= radio.sensitivity_dbm and bool(keep[k]) \
            and k not in forced_ack_loss
        if delivered:
            next_tx = ctrl.on_ack(rssi)
            predicted = None
        else:
            next_tx = ctrl.on_missed_ack()
            predicted = ctrl.last_prediction_dbm
        records.append(LoopRecord(
            seq=k, tx_dbm=tx, rssi_dbm=float(rssi), delivered=delivered,
            predicted_dbm=predicted, mode=ctrl.state.mode,
        ))
        tx = next_tx
    return LoopResult(records=tuple(records), threshold_dbm=config.threshold_dbm)


def run_fixed_power(channel: ChannelModel, radio: RadioProfile, tx_dbm: float,
                    n_packets: int, loss: LossModel | None = None,
                    threshold_dbm: float | None = None) -> LoopResult:
    """Baseline: transmit every packet at a fixed power (e.g. always-max)."""
    gains = channel.realize(n_packets, radio.rate_pps) - channel.base_path_loss_db
    keep = loss.keep_mask(n_packets) if loss is not None else np.ones(n_packets, dtype=bool)
    records = tuple(
        LoopRecord(
            seq=k,
            tx_dbm=tx_dbm,
            rssi_dbm=float(tx_dbm + gains[k]),
            delivered=bool(tx_dbm + gains[k] >= radio.sensitivity_dbm and keep[k]),
            predicted_dbm=None,
            mode="fixed",
        )
        for k in range(n_packets)
    )
    thr = radio.sensitivity_dbm if threshold_dbm is None else threshold_dbm
    return LoopResult(records=records, threshold_dbm=thr)
