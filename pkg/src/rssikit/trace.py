"""Received-power observation streams: the sample/trace data model plus
lossy CSV ingestion, export, and slope estimation.

A trace is an ordered, gap-aware record of per-packet received power.
Sequence numbers are the ground truth for ordering and loss accounting;
timestamps either come from the file or are derived from the nominal
packet interval.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

# Plausibility window for a received-power reading. Rows outside it are
# rejected at ingestion time (typical low-power radios report far inside it).
RSSI_MIN_DBM = -130.0
RSSI_MAX_DBM = 20.0

# CSV schema shared by ingest/export and every subcommand that emits traces.
CSV_FIELDS = ("seq", "t_s", "rssi_dbm", "tx_power_dbm")


class IngestError(ValueError):
    """A trace CSV file could not be parsed into a valid trace."""


@dataclass(frozen=True)
class RssiSample:
    """One packet's received-power observation.

    Attributes:
        seq: Packet sequence number (non-negative, unique within a trace).
        t: Observation time in seconds.
        rssi: Received power in dBm.
        tx_power: Transmit power in dBm that produced the packet, if known.
    """

    seq: int
    t: float
    rssi: float
    tx_power: float | None = None

    def __post_init__(self) -> None:
        if self.seq < 0:
            raise ValueError(f"seq must be non-negative, got {self.seq}")
        if not math.isfinite(self.t) or self.t < 0:
            raise ValueError(f"t must be finite and >= 0, got {self.t}")
        if not math.isfinite(self.rssi):
            raise ValueError("rssi must be finite")
        if self.tx_power is not None and not math.isfinite(self.tx_power):
            raise ValueError("tx_power must be finite when present")


@dataclass(frozen=True)
class Trace:
    """An immutable, seq-ordered stream of received-power samples.

    Missing sequence numbers mark lost packets; nothing is interpolated.

    Attributes:
        samples: Samples sorted by strictly increasing seq.
        nominal_interval: Seconds between consecutive sequence numbers.
        meta: Free-form labels (deployment, radio, ingestion counters).
    """

    samples: tuple[RssiSample, ...]
    nominal_interval: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.nominal_interval) and self.nominal_interval > 0):
            raise ValueError(f"nominal_interval must be > 0, got {self.nominal_interval}")
        object.__setattr__(self, "samples", tuple(self.samples))
        prev = None
        for s in self.samples:
            if prev is not None:
                if s.seq <= prev.seq:
                    raise ValueError(f"samples not strictly ordered by seq at seq={s.seq}")
                if s.t <= prev.t:
                    raise ValueError(f"t must strictly increase with seq (seq={s.seq})")
            prev = s

    def __len__(self) -> int:
        return len(self.samples)

    @cached_property
    def seq(self) -> np.ndarray:
        a = np.array([s.seq for s in self.samples], dtype=np.int64)
        a.flags.writeable = False
        return a

    @cached_property
    def t(self) -> np.ndarray:
        a = np.array([s.t for s in self.samples], dtype=np.float64)
        a.flags.writeable = False
        return a

    @cached_property
    def rssi(self) -> np.ndarray:
        a = np.array([s.rssi for s in self.samples], dtype=np.float64)
        a.flags.writeable = False
        return a

    @cached_property
    def tx_power(self) -> np.ndarray:
        a = np.array(
            [s.tx_power if s.tx_power is not None else np.nan for s in self.samples],
            dtype=np.float64,
        )
        a.flags.writeable = False
        return a

    @property
    def loss_ratio(self) -> float:
        """Fraction of sequence numbers missing from [min_seq, max_seq]."""
        if not self.samples:
            return float("nan")
        span = self.samples[-1].seq - self.samples[0].seq + 1
        return 1.0 - len(self.samples) / span

    def shifted(self, offset_db: float) -> "Trace":
        """Copy of the trace with a constant added to every rssi value."""
        moved = tuple(
            RssiSample(s.seq, s.t, s.rssi + offset_db, s.tx_power) for s in self.samples
        )
        return Trace(moved, self.nominal_interval, dict(self.meta))


@dataclass(frozen=True)
class DerivativeSeries:
    """Backward-difference slope estimates r'(t) in dB/s.

    Defined at every sample that has a predecessor; across a gap the actual
    elapsed time is the denominator, so the slope stays unbiased under loss.
    """

    seq: np.ndarray
    t: np.ndarray
    slope: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.seq) == len(self.t) == len(self.slope)):
            raise ValueError("seq, t and slope must have equal length")
        if not np.all(np.isfinite(self.slope)):
            raise ValueError("slope values must be finite")
        for a in (self.seq, self.t, self.slope):
            a.flags.writeable = False

    def __len__(self) -> int:
        return len(self.slope)


def derivative_series(trace: Trace) -> DerivativeSeries:
    """Estimate the instantaneous rate of change of received power.

    Uses the backward first difference: only past samples are available to
    a live transmitter, so central differences would be non-causal.

    Args:
        trace: Source trace with at least 2 samples.

    Returns:
        Slopes aligned to every sample except the first.
    """
    if len(trace) < 2:
        raise ValueError("derivative needs at least 2 samples")
    dt = np.diff(trace.t)
    dr = np.diff(trace.rssi)
    return DerivativeSeries(
        seq=trace.seq[1:].copy(), t=trace.t[1:].copy(), slope=dr / dt
    )


def _derive_t(seq: int, nominal_interval: float) -> float:
    # Quantized to the CSV schema's microsecond precision so that derived
    # timestamps survive an export/ingest round trip bit-exactly.
    return round(seq * nominal_interval, 6)


def ingest_csv(path: str | Path, nominal_interval: float) -> Trace:
    """Parse a trace CSV file.

    The header must declare at least ``seq`` and ``rssi_dbm``; ``t_s`` and
    ``tx_power_dbm`` are optional. Rows with rssi outside the plausibility
    window are dropped and counted; duplicate sequence numbers keep the last
    occurrence (retransmissions carry fresher channel state); a malformed row
    aborts ingestion with its line number.
    """
    path = Path(path)
    if not (math.isfinite(nominal_interval) and nominal_interval > 0):
        raise ValueError(f"nominal_interval must be > 0, got {nominal_interval}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty file")
        cols = {c.strip() for c in reader.fieldnames}
        missing = {"seq", "rssi_dbm"} - cols
        if missing:
            raise IngestError(f"{path}: missing required columns {sorted(missing)}")

        rows: dict[int, RssiSample] = {}
        rejected = 0
        duplicates = 0
        for lineno, row in enumerate(reader, start=2):
            try:
                seq = int(row["seq"])
                rssi = float(row["rssi_dbm"])
                raw_t = row.get("t_s")
                t = float(raw_t) if raw_t not in (None, "") else None
                raw_tx = row.get("tx_power_dbm")
                tx = float(raw_tx) if raw_tx not in (None, "") else None
            except (TypeError, ValueError) as exc:
                raise IngestError(f"{path}:{lineno}: malformed row ({exc})") from exc
            if seq < 0:
                raise IngestError(f"{path}:{lineno}: negative seq {seq}")
            if not (math.isfinite(rssi) and RSSI_MIN_DBM <= rssi <= RSSI_MAX_DBM):
                rejected += 1
                continue
            if t is None:
                t = _derive_t(seq, nominal_interval)
            if seq in rows:
                duplicates += 1
            try:
                rows[seq] = RssiSample(seq=seq, t=t, rssi=rssi, tx_power=tx)
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: {exc}") from exc

    if not rows:
        raise IngestError(f"{path}: no usable rows")
    if rejected:
        logger.warning("%s: rejected %d rows with rssi outside [%s, %s] dBm",
                       path, rejected, RSSI_MIN_DBM, RSSI_MAX_DBM)
    if duplicates:
        logger.warning("%s: %d duplicate seq rows, kept last occurrence", path, duplicates)

    samples = tuple(rows[s] for s in sorted(rows))
    meta = {
        "source": path.name,
        "rejected_rssi_rows": rejected,
        "duplicate_seq_rows": duplicates,
    }
    try:
        return Trace(samples=samples, nominal_interval=nominal_interval, meta=meta)
    except ValueError as exc:
        raise IngestError(f"{path}: {exc}") from exc


def export_csv(trace: Trace, path: str | Path) -> None:
    """Write a trace in the standard CSV schema.

    Fixed formatting: 6 decimals for t_s, 2 decimals for dBm fields, so the
    output is byte-deterministic for a given trace.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for s in trace.samples:
            tx = f"{s.tx_power:.2f}" if s.tx_power is not None else ""
            writer.writerow([s.seq, f"{s.t:.6f}", f"{s.rssi:.2f}", tx])
