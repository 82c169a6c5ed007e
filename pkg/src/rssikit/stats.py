"""Second-order statistics of the received-power process.

Everything here is central (mean-removed). Raw received power in dBm has a
large negative mean that would make the predictor's normal equations
ill-conditioned, and the quantity of interest is the fluctuation around the
mean anyway, so all moments are autocovariances; the removed mean travels
with downstream models and is added back at prediction time.

Estimators are deterministic pure functions of the trace: identical input
yields bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trace import DerivativeSeries, Trace

# Below this many contributing sample pairs a second-order moment is too
# noisy to fit from; configurable per call.
DEFAULT_MIN_PAIRS = 8


class DegenerateProcessError(ValueError):
    """The trace carries no usable fluctuation (constant, zero variance)."""


class InsufficientSupportError(ValueError):
    """Too few sample pairs survive gap exclusion at a requested lag."""


@dataclass(frozen=True)
class AcfEstimate:
    """Sample autocovariance of a trace over a lag grid.

    Only lags >= 0 are stored; by symmetry the value at -k equals the value
    at +k. ``d1`` is the finite-difference derivative of the autocovariance
    over the lag grid (forced to exactly 0 at lag 0 by symmetry) and
    ``d2_at_0`` is its second derivative at lag 0 using that symmetry.

    Attributes:
        lags: Integer lag indices 0..L; lag k spans k * step_s seconds.
        step_s: Lag grid spacing in seconds (the trace's nominal interval).
        values: Autocovariance per lag, dB^2.
        normalized: values / values[0]; exactly 1 at lag 0.
        n_pairs: Contributing sample pairs per lag.
        d1: Derivative of values over the lag grid, dB^2/s.
        d2_at_0: Second derivative at lag 0, dB^2/s^2.
        mean_dbm: Trace mean removed before estimation.
    """

    lags: np.ndarray
    step_s: float
    values: np.ndarray
    normalized: np.ndarray
    n_pairs: np.ndarray
    d1: np.ndarray
    d2_at_0: float
    mean_dbm: float

    def __post_init__(self) -> None:
        if self.normalized[0] != 1.0:
            raise ValueError("normalized autocovariance must be exactly 1 at lag 0")
        if np.max(np.abs(self.normalized)) > 1.0 + 1e-9:
            raise ValueError("normalized autocovariance outside [-1, 1] tolerance")
        if self.d1[0] != 0.0:
            raise ValueError("d1 must be exactly 0 at lag 0")
        for a in (self.lags, self.values, self.normalized, self.n_pairs, self.d1):
            a.flags.writeable = False

    @property
    def lag_seconds(self) -> np.ndarray:
        return self.lags * self.step_s

    def lag_index(self, tau: float) -> int:
        """Map a lag in seconds onto the stored grid; reject off-grid lags."""
        k = round(tau / self.step_s)
        if abs(tau - k * self.step_s) > 1e-9 or not 0 <= k < len(self.lags):
            raise ValueError(f"tau={tau} s is not on the estimated lag grid")
        return int(k)


@dataclass(frozen=True)
class MomentSet:
    """The five second-order sample moments the two-term predictor needs.

    All moments are central and averaged over one common index set: only
    samples where the value, its slope, and the value one lag ahead all
    exist contribute, so the normal equations and the orthogonality
    principle hold exactly on the fitting data.

    Attributes:
        rr0: E{r.r} at lag 0, dB^2.
        rpr0: E{r.r'} at lag 0, dB^2/s.
        rprp0: E{r'.r'} at lag 0, dB^2/s^2.
        rr_tau: E{r(t+tau).r(t)}, dB^2.
        rrp_tau: E{r(t+tau).r'(t)}, dB^2/s.
        tau: Lag in seconds.
        n: Contributing triples.
        mean_removed: Always True for estimates produced here.
        mean_r: Removed process mean, dBm.
        mean_rp: Removed slope mean, dB/s.
        rr0_ahead: E{r(t+tau)^2} over the same index set (for consistency
            checks); None for hand-built sets.
        step_s: Sample grid spacing the lag lives on; None for hand-built sets.
    """

    rr0: float
    rpr0: float
    rprp0: float
    rr_tau: float
    rrp_tau: float
    tau: float
    n: int
    mean_removed: bool = True
    mean_r: float = 0.0
    mean_rp: float = 0.0
    rr0_ahead: float | None = None
    step_s: float | None = None

    def __post_init__(self) -> None:
        if self.rr0 <= 0:
            raise ValueError(f"rr0 must be positive, got {self.rr0}")
        if self.rprp0 < 0:
            raise ValueError(f"rprp0 must be non-negative, got {self.rprp0}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.rr0_ahead is not None:
            # Cauchy-Schwarz with a small slack for float accumulation.
            if self.rr_tau**2 > self.rr0 * self.rr0_ahead * (1.0 + 1e-9):
                raise ValueError("moments violate the Cauchy-Schwarz bound")


@dataclass(frozen=True)
class IdentityCheck:
    """Diagnostic comparison of directly estimated derivative moments with
    finite differences of the autocovariance.

    Purely informational; fitting never depends on it. ``sign`` records the
    empirically selected orientation of the cross-moment comparison, which
    depends on which time argument of the autocovariance one differentiates.
    ``low_confidence`` flags traces whose correlation has already collapsed
    at one lag, where the second-difference curvature estimate is dominated
    by discretization rather than process behaviour.
    """

    tau: float
    sign: int
    cross_dev: float
    curvature_dev: float
    low_confidence: bool


def _centered_grid(seq: np.ndarray, values: np.ndarray, mean: float,
                   seq0: int, size: int) -> np.ndarray:
    grid = np.full(size, np.nan)
    grid[seq - seq0] = values - mean
    return grid


def sample_acf(trace: Trace, max_lag: int,
               min_pairs: int = DEFAULT_MIN_PAIRS) -> AcfEstimate:
    """Mean-removed, biased sample autocovariance over lags 0..max_lag.

    A pair contributes at lag k only when both sequence numbers are present;
    pairs spanning lost packets simply drop out (interpolating would
    manufacture correlation). The biased 1/N normalization keeps the implied
    covariance positive semidefinite, which downstream guarantees a
    non-negative predictor error estimate.

    Args:
        trace: Source trace; must not be constant.
        max_lag: Largest lag index, >= 1.
        min_pairs: Minimum contributing pairs per lag.

    Raises:
        DegenerateProcessError: Constant trace.
        InsufficientSupportError: Any requested lag has fewer than
            min_pairs contributing pairs.
    """
    if max_lag < 1:
        raise ValueError(f"max_lag must be >= 1, got {max_lag}")
    n = len(trace)
    if n < max_lag + 2:
        raise InsufficientSupportError(
            f"trace has {n} samples, need at least {max_lag + 2} for max_lag={max_lag}"
        )
    r = trace.rssi
    if float(r.max()) == float(r.min()):
        raise DegenerateProcessError("degenerate process: constant trace")

    mean_r = float(r.mean())
    seq0 = int(trace.seq[0])
    size = int(trace.seq[-1]) - seq0 + 1
    grid = _centered_grid(trace.seq, r, mean_r, seq0, size)

    values = np.empty(max_lag + 1)
    pairs = np.empty(max_lag + 1, dtype=np.int64)
    for k in range(max_lag + 1):
        prod = grid[: size - k] * grid[k:] if k else grid * grid
        valid = np.isfinite(prod)
        m = int(valid.sum())
        if m < min_pairs:
            raise InsufficientSupportError(
                f"lag {k}: only {m} contributing pairs (need >= {min_pairs})"
            )
        pairs[k] = m
        values[k] = float(prod[valid].sum()) / n

    normalized = values / values[0]
    normalized[0] = 1.0

    step = trace.nominal_interval
    d1 = np.zeros(max_lag + 1)
    if max_lag >= 2:
        d1[1:-1] = (values[2:] - values[:-2]) / (2.0 * step)
    d1[-1] = (values[-1] - values[-2]) / step
    d1[0] = 0.0
    d2_at_0 = 2.0 * (values[1] - values[0]) / step**2

    return AcfEstimate(
        lags=np.arange(max_lag + 1, dtype=np.int64),
        step_s=step,
        values=values,
        normalized=normalized,
        n_pairs=pairs,
        d1=d1,
        d2_at_0=float(d2_at_0),
        mean_dbm=mean_r,
    )


def moment_set(trace: Trace, deriv: DerivativeSeries, tau: float,
               min_pairs: int = DEFAULT_MIN_PAIRS) -> MomentSet:
    """Estimate the five fitting moments at one lag.

    tau must be a positive integer multiple of the trace's nominal interval;
    there is no interpolation. Means are estimated once from the full trace
    (values) and full derivative series (slopes), then every moment is the
    average of centered products over the joint index set where r(t), r'(t)
    and r(t+tau) all exist.
    """
    step = trace.nominal_interval
    k_f = tau / step
    k = round(k_f)
    if k < 1 or abs(k_f - k) > 1e-9:
        raise ValueError(
            f"tau={tau} s is not a positive integer multiple of the {step} s sample grid"
        )
    if len(trace) < 2:
        raise InsufficientSupportError("trace too short for moment estimation")

    mean_r = float(trace.rssi.mean())
    mean_rp = float(deriv.slope.mean())

    seq0 = int(trace.seq[0])
    size = int(trace.seq[-1]) - seq0 + 1
    r_grid = _centered_grid(trace.seq, trace.rssi, mean_r, seq0, size)
    d_grid = _centered_grid(deriv.seq, deriv.slope, mean_rp, seq0, size)

    if size <= k:
        raise InsufficientSupportError(f"tau={tau}: trace shorter than one lag")
    x1 = r_grid[: size - k]
    x2 = d_grid[: size - k]
    y = r_grid[k:]
    mask = np.isfinite(x1) & np.isfinite(x2) & np.isfinite(y)
    n = int(mask.sum())
    if n < min_pairs:
        raise InsufficientSupportError(
            f"tau={tau}: only {n} contributing triples (need >= {min_pairs})"
        )
    x1, x2, y = x1[mask], x2[mask], y[mask]

    rr0 = float(np.mean(x1 * x1))
    if rr0 <= 0:
        raise DegenerateProcessError("degenerate process: zero variance over fitting set")

    return MomentSet(
        rr0=rr0,
        rpr0=float(np.mean(x1 * x2)),
        rprp0=float(np.mean(x2 * x2)),
        rr_tau=float(np.mean(y * x1)),
        rrp_tau=float(np.mean(y * x2)),
        tau=float(tau),
        n=n,
        mean_removed=True,
        mean_r=mean_r,
        mean_rp=mean_rp,
        rr0_ahead=float(np.mean(y * y)),
        step_s=step,
    )


def check_derivative_identities(acf: AcfEstimate, m: MomentSet) -> IdentityCheck:
    """Compare directly estimated derivative moments against autocovariance
    finite differences.

    Reports |rrp_tau - s * d1(tau)| / values[0] with the sign s chosen
    empirically, and |rprp0 - (-d2_at_0)| / values[0]. Diagnostic only; the
    fitting paths always use directly estimated moments.
    """
    k = acf.lag_index(m.tau)
    scale = float(acf.values[0])
    d1k = float(acf.d1[k])

    dev_plus = abs(m.rrp_tau - d1k) / scale
    dev_minus = abs(m.rrp_tau + d1k) / scale
    if dev_plus <= dev_minus:
        sign, cross_dev = 1, dev_plus
    else:
        sign, cross_dev = -1, dev_minus

    curvature_dev = abs(m.rprp0 - (-acf.d2_at_0)) / scale
    low_confidence = bool(acf.normalized[1] < 0.5)

    return IdentityCheck(
        tau=m.tau,
        sign=sign,
        cross_dev=float(cross_dev),
        curvature_dev=float(curvature_dev),
        low_confidence=low_confidence,
    )
