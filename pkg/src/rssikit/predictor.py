"""Two-term linear prediction of received power across lost packets.

The predictor estimates the power one lag ahead from the current value and
its slope:

    estimate(t + tau) = mean + w_level * (r(t) - mean)
                             + w_slope * (r'(t) - slope mean)

Three fitting paths produce the weights:

* ``fit_normal_equations`` solves the 2x2 system that the minimum mean
  square error condition yields. For a 2x2 system the closed form is
  trivial, and this path serves as the in-repo reference proving the
  orthonormal path correct.
* ``fit_orthonormal`` reaches the same weights without solving any coupled
  system: it whitens (value, slope) into two unit-variance, uncorrelated
  components, projects the future value onto each independently, and maps
  the projections back. This is the default path in the control loop.
* ``fit_simplified`` needs no statistics at all: for small lags the
  autocovariance is nearly flat at 0, which collapses the weights to
  exactly (1, tau), i.e. linear extrapolation along the current slope.

Weights are fitted on mean-removed data; the removed mean is stored in the
model and added back at prediction time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .stats import DEFAULT_MIN_PAIRS, MomentSet, moment_set
from .trace import RssiSample, Trace, derivative_series

METHOD_NORMAL_EQ = "normal_eq"
METHOD_ORTHONORMAL = "orthonormal"
METHOD_SIMPLIFIED = "simplified"
METHODS = (METHOD_NORMAL_EQ, METHOD_ORTHONORMAL, METHOD_SIMPLIFIED)

# Relative determinant floor below which the 2x2 moment matrix is treated
# as singular (collinear value/slope inputs).
DET_RTOL = 1e-10


class DegenerateMomentsError(ValueError):
    """The moment matrix is (near-)singular; no stable fit exists."""


class LagMismatchError(ValueError):
    """A model fitted at one lag was asked to serve another."""


def _check_identifiable(m: MomentSet) -> float:
    """Reject degenerate moments; returns the determinant.

    Two failure modes: a near-singular matrix (value and slope collinear)
    and a slope variance that is pure float dust relative to the value
    variance over one sampling step (constant-derivative traces), where the
    relative determinant test alone is blind because both factors collapse
    together.
    """
    det = m.rr0 * m.rprp0 - m.rpr0**2
    timescale = m.step_s if m.step_s is not None else (m.tau if m.tau > 0 else None)
    if timescale is not None and m.rprp0 * timescale**2 <= DET_RTOL * m.rr0:
        raise DegenerateMomentsError(
            f"degenerate moments: slope variance {m.rprp0:.6e} is negligible"
        )
    if not det > DET_RTOL * m.rr0 * m.rprp0:
        raise DegenerateMomentsError(f"degenerate moments: det={det:.6e}")
    return det


@dataclass(frozen=True)
class OrthonormalBasis:
    """Whitening transform and projection coefficients of the inversion-free
    fitting path.

    The two orthonormal components are

        p1 = t11 * (r - mean)
        p2 = t21 * (r - mean) + t22 * (r' - slope mean)

    with unit variance and zero cross-correlation under the fitting moments.
    ``proj1``/``proj2`` are the projections of the future value onto p1/p2;
    ``unit_residuals`` records |E[p1^2]-1|, |E[p2^2]-1|, |E[p1 p2]|
    evaluated with the fitting moments.
    """

    t11: float
    t21: float
    t22: float
    proj1: float
    proj2: float
    unit_residuals: tuple[float, float, float]


@dataclass(frozen=True)
class PredictorModel:
    """Fitted two-term predictor bound to one lag.

    Attributes:
        method: One of normal_eq, orthonormal, simplified.
        tau: Lag in seconds the weights were fitted for. For the simplified
            method this is the per-step lag; n-step prediction scales it.
        w_level: Weight on the (mean-removed) current value, dimensionless.
        w_slope: Weight on the (mean-removed) current slope, seconds.
        mean_r: Removed process mean in dBm, added back at prediction time.
        mean_rp: Removed slope mean in dB/s. Essentially zero for stationary
            data; kept so fitting and prediction use identical centering.
        analytic_mse: Expected squared prediction error in dB^2 under the
            fitting moments; None when no moments were supplied.
        basis: Orthonormal construction record (orthonormal method only).
        source_moments: Fitting moments, for provenance.
        step_s: Sample grid spacing; statistical models refuse to serve a
            step count that does not reproduce tau.
    """

    method: str
    tau: float
    w_level: float
    w_slope: float
    mean_r: float = 0.0
    mean_rp: float = 0.0
    analytic_mse: float | None = None
    basis: OrthonormalBasis | None = None
    source_moments: MomentSet | None = None
    step_s: float | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == METHOD_SIMPLIFIED:
            if self.w_level != 1.0 or self.w_slope != self.tau:
                raise ValueError("simplified model must have weights (1, tau)")
        if self.basis is not None:
            b = self.basis
            lvl = b.proj1 * b.t11 + b.proj2 * b.t21
            slp = b.proj2 * b.t22
            if abs(lvl - self.w_level) > 1e-12 * max(1.0, abs(self.w_level)) or \
               abs(slp - self.w_slope) > 1e-12 * max(1.0, abs(self.w_slope)):
                raise ValueError("stored weights inconsistent with basis record")
        if self.analytic_mse is not None and self.source_moments is not None \
                and self.method != METHOD_SIMPLIFIED:
            # Optimally fitted weights can never do worse than predicting
            # the mean; the simplified weights carry no such guarantee.
            if self.analytic_mse > self.source_moments.rr0 * (1.0 + 1e-9):
                raise ValueError("analytic_mse exceeds the lag-0 autocovariance")

    def apply(self, anchor_r, anchor_rp, n_steps: int = 1):
        """Vectorized prediction formula; scalars in, scalars out.

        The statistical methods only serve the lag they were fitted at; the
        simplified method substitutes tau = n_steps * per-step lag at call
        time.
        """
        if n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {n_steps}")
        if self.method == METHOD_SIMPLIFIED:
            tau_eff = n_steps * self.tau
            return anchor_r + tau_eff * anchor_rp
        if self.step_s is not None:
            if abs(n_steps * self.step_s - self.tau) > 1e-9:
                raise LagMismatchError(
                    f"model fitted at tau={self.tau} s cannot serve "
                    f"{n_steps} steps of {self.step_s} s"
                )
        elif n_steps != 1:
            raise LagMismatchError(
                "model carries no step size; only single-step prediction at its own lag"
            )
        return self.mean_r + self.w_level * (anchor_r - self.mean_r) \
            + self.w_slope * (anchor_rp - self.mean_rp)


@dataclass(frozen=True)
class Prediction:
    """One prediction: target time, value, and the model's error estimate."""

    t_target: float
    value: float
    mse: float | None
    steps_ahead: int
    basis_sample: tuple[float, float, float]

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError("predicted value must be finite")
        if self.steps_ahead < 1:
            raise ValueError("steps_ahead must be >= 1")


def analytic_mse(model: PredictorModel, m: MomentSet) -> float:
    """Expected squared prediction error under the fitting moments.

    Orthogonality of the error to both inputs at the optimum reduces the
    error power to

        rr0 - w_level * rr_tau - w_slope * rrp_tau

    which is non-negative for optimally fitted weights (positive
    semidefinite moment matrix). For non-optimal weights (the simplified
    method at larger lags) it is the same small-lag approximation the
    weights themselves rest on.
    """
    return m.rr0 - model.w_level * m.rr_tau - model.w_slope * m.rrp_tau


def fit_normal_equations(m: MomentSet) -> PredictorModel:
    """Fit by the closed-form solution of the 2x2 normal equations.

    Solves

        [rr_tau ]   [rr0   rpr0 ] [w_level]
        [rrp_tau] = [rpr0  rprp0] [w_slope]

    directly (no general matrix inversion routine is involved).

    Raises:
        DegenerateMomentsError: Near-singular moment matrix, e.g. constant
            or constant-slope traces.
    """
    det = _check_identifiable(m)
    w_level = (m.rr_tau * m.rprp0 - m.rrp_tau * m.rpr0) / det
    w_slope = (m.rr0 * m.rrp_tau - m.rpr0 * m.rr_tau) / det
    model = PredictorModel(
        method=METHOD_NORMAL_EQ,
        tau=m.tau,
        w_level=w_level,
        w_slope=w_slope,
        mean_r=m.mean_r,
        mean_rp=m.mean_rp,
        source_moments=m,
        step_s=m.step_s,
    )
    return replace(model, analytic_mse=analytic_mse(model, m))


def fit_orthonormal(m: MomentSet) -> PredictorModel:
    """Fit via whitening instead of solving a coupled system.

    Construction, from the unit-variance and zero-cross-moment conditions:

        t11 = 1 / sqrt(rr0)
        t22 = sqrt(rr0 / (rr0 * rprp0 - rpr0^2))
        t21 = -(rpr0 / rr0) * t22

    The future value projects independently onto each component
    (proj1 = rr_tau * t11, proj2 = rr_tau * t21 + rrp_tau * t22) because the
    components are uncorrelated with unit variance, and the weights map back
    as w_level = proj1*t11 + proj2*t21, w_slope = proj2*t22. No 2x2 solve is
    performed anywhere on this path.

    Raises:
        DegenerateMomentsError: Non-positive-definite moments.
    """
    radicand = m.rr0 * m.rprp0 - m.rpr0**2
    if m.rr0 <= 0 or radicand <= 0:
        raise DegenerateMomentsError(
            f"non-positive-definite moments: rr0={m.rr0:.6e}, radicand={radicand:.6e}"
        )
    _check_identifiable(m)
    t11 = 1.0 / math.sqrt(m.rr0)
    t22 = math.sqrt(m.rr0 / radicand)
    t21 = -(m.rpr0 / m.rr0) * t22

    proj1 = m.rr_tau * t11
    proj2 = m.rr_tau * t21 + m.rrp_tau * t22

    w_level = proj1 * t11 + proj2 * t21
    w_slope = proj2 * t22

    unit_residuals = (
        abs(t11 * t11 * m.rr0 - 1.0),
        abs(t21 * t21 * m.rr0 + 2.0 * t21 * t22 * m.rpr0 + t22 * t22 * m.rprp0 - 1.0),
        abs(t11 * (t21 * m.rr0 + t22 * m.rpr0)),
    )
    basis = OrthonormalBasis(
        t11=t11, t21=t21, t22=t22, proj1=proj1, proj2=proj2,
        unit_residuals=unit_residuals,
    )
    model = PredictorModel(
        method=METHOD_ORTHONORMAL,
        tau=m.tau,
        w_level=w_level,
        w_slope=w_slope,
        mean_r=m.mean_r,
        mean_rp=m.mean_rp,
        basis=basis,
        source_moments=m,
        step_s=m.step_s,
    )
    return replace(model, analytic_mse=analytic_mse(model, m))


def fit_simplified(tau: float, moments: MomentSet | None = None) -> PredictorModel:
    """Small-lag model with weights exactly (1, tau); needs no statistics.

    When a MomentSet is supplied an error estimate is attached. The
    orthogonality shortcut of ``analytic_mse`` is exact only at the MMSE
    optimum and can go negative for these fixed weights, so the full
    quadratic error is used here instead (falling back to the shortcut for
    hand-built moment sets that lack the lead variance).
    """
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    mse = None
    if moments is not None:
        m = moments
        if m.rr0_ahead is not None:
            mse = (
                m.rr0_ahead
                - 2.0 * (m.rr_tau + tau * m.rrp_tau)
                + (m.rr0 + 2.0 * tau * m.rpr0 + tau * tau * m.rprp0)
            )
        else:
            probe = PredictorModel(method=METHOD_SIMPLIFIED, tau=tau,
                                   w_level=1.0, w_slope=tau)
            mse = analytic_mse(probe, moments)
    return PredictorModel(
        method=METHOD_SIMPLIFIED,
        tau=float(tau),
        w_level=1.0,
        w_slope=float(tau),
        mean_r=0.0,
        analytic_mse=mse,
        source_moments=moments,
        step_s=moments.step_s if moments is not None else None,
    )


def predict(model: PredictorModel, anchor_r: float, anchor_rp: float,
            n_steps: int = 1, anchor_t: float = 0.0) -> Prediction:
    """Predict received power n sampling steps ahead of an anchor sample.

    Args:
        model: Fitted model. Statistical models must have been fitted at
            tau = n_steps * step; the simplified model is lag-parametric.
        anchor_r: Anchor received power, dBm.
        anchor_rp: Anchor slope, dB/s.
        n_steps: Prediction horizon in sampling steps, >= 1.
        anchor_t: Anchor time in seconds (for the target timestamp).
    """
    value = model.apply(anchor_r, anchor_rp, n_steps)
    if model.method == METHOD_SIMPLIFIED:
        horizon = n_steps * model.tau
    else:
        horizon = model.tau
    return Prediction(
        t_target=anchor_t + horizon,
        value=float(value),
        mse=model.analytic_mse,
        steps_ahead=n_steps,
        basis_sample=(anchor_t, anchor_r, anchor_rp),
    )


def model_to_json(model: PredictorModel) -> str:
    """Serialize a fitted model as a JSON text record.

    Floats keep full precision (repr round trip), so dump/load is exact.
    """
    payload: dict = {
        "method": model.method,
        "tau_s": model.tau,
        "step_s": model.step_s,
        "w_level": model.w_level,
        "w_slope": model.w_slope,
        "mean_dbm": model.mean_r,
        "mean_slope_db_s": model.mean_rp,
        "analytic_mse_db2": model.analytic_mse,
    }
    if model.basis is not None:
        payload["basis"] = {
            "t11": model.basis.t11,
            "t21": model.basis.t21,
            "t22": model.basis.t22,
            "proj1": model.basis.proj1,
            "proj2": model.basis.proj2,
            "unit_residuals": list(model.basis.unit_residuals),
        }
    if model.source_moments is not None:
        m = model.source_moments
        payload["moments"] = {
            "rr0": m.rr0, "rpr0": m.rpr0, "rprp0": m.rprp0,
            "rr_tau": m.rr_tau, "rrp_tau": m.rrp_tau,
            "tau_s": m.tau, "n": m.n,
            "mean_r": m.mean_r, "mean_rp": m.mean_rp,
            "rr0_ahead": m.rr0_ahead, "step_s": m.step_s,
        }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def model_from_json(text: str) -> PredictorModel:
    """Rebuild a model from its JSON text record."""
    payload = json.loads(text)
    basis = None
    if "basis" in payload:
        b = payload["basis"]
        basis = OrthonormalBasis(
            t11=b["t11"], t21=b["t21"], t22=b["t22"],
            proj1=b["proj1"], proj2=b["proj2"],
            unit_residuals=tuple(b["unit_residuals"]),
        )
    moments = None
    if "moments" in payload:
        mm = payload["moments"]
        moments = MomentSet(
            rr0=mm["rr0"], rpr0=mm["rpr0"], rprp0=mm["rprp0"],
            rr_tau=mm["rr_tau"], rrp_tau=mm["rrp_tau"],
            tau=mm["tau_s"], n=mm["n"],
            mean_r=mm["mean_r"], mean_rp=mm["mean_rp"],
            rr0_ahead=mm["rr0_ahead"], step_s=mm["step_s"],
        )
    return PredictorModel(
        method=payload["method"],
        tau=payload["tau_s"],
        w_level=payload["w_level"],
        w_slope=payload["w_slope"],
        mean_r=payload["mean_dbm"],
        mean_rp=payload.get("mean_slope_db_s", 0.0),
        analytic_mse=payload["analytic_mse_db2"],
        basis=basis,
        source_moments=moments,
        step_s=payload["step_s"],
    )


class SlidingWindowPredictor:
    """Per-lag models refit over a sliding window of observations.

    Single-writer: one owner feeds observations via ``observe``; fitted
    models are immutable snapshots that readers may hold freely. Refits run
    every ``refit_every`` observations once ``min_samples`` have arrived.
    A lag whose statistics are degenerate or under-supported simply has no
    model until a later refit succeeds.
    """

    def __init__(self, method: str, lags: tuple[int, ...], step_s: float,
                 window: int = 512, refit_every: int = 64,
                 min_samples: int = 64, min_pairs: int = DEFAULT_MIN_PAIRS):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        if step_s <= 0 or window < 2 or refit_every < 1:
            raise ValueError("invalid window configuration")
        self.method = method
        self.lags = tuple(sorted(set(int(k) for k in lags)))
        if any(k < 1 for k in self.lags):
            raise ValueError("lags must be >= 1")
        self.step_s = float(step_s)
        self.window = int(window)
        self.refit_every = int(refit_every)
        self.min_samples = int(min_samples)
        self.min_pairs = int(min_pairs)
        self._obs: list[tuple[int, float]] = []
        self._since_refit = 0
        self._models: dict[int, PredictorModel] = {}

    def observe(self, seq: int, value: float) -> None:
        """Record one observation; seq gaps mark missed feedback."""
        if self._obs and seq <= self._obs[-1][0]:
            raise ValueError("observations must arrive in increasing seq order")
        self._obs.append((int(seq), float(value)))
        if len(self._obs) > self.window:
            del self._obs[: len(self._obs) - self.window]
        self._since_refit += 1
        if self.method != METHOD_SIMPLIFIED and \
                len(self._obs) >= self.min_samples and \
                self._since_refit >= self.refit_every:
            self._refit()
            self._since_refit = 0

    def anchor(self) -> tuple[float, float, float] | None:
        """Latest (t, value, slope) anchor, or None with < 2 observations."""
        if len(self._obs) < 2:
            return None
        (s0, v0), (s1, v1) = self._obs[-2], self._obs[-1]
        dt = (s1 - s0) * self.step_s
        return (s1 * self.step_s, v1, (v1 - v0) / dt)

    def model_for(self, n_steps: int) -> PredictorModel | None:
        """Model able to predict n_steps ahead, or None if unavailable."""
        if self.method == METHOD_SIMPLIFIED:
            return fit_simplified(self.step_s)
        return self._models.get(int(n_steps))

    def _refit(self) -> None:
        base = self._obs[0][0]
        samples = tuple(
            RssiSample(seq=s - base, t=round((s - base) * self.step_s, 6), rssi=v)
            for s, v in self._obs
        )
        try:
            win_trace = Trace(samples=samples, nominal_interval=self.step_s)
            deriv = derivative_series(win_trace)
        except ValueError:
            return
        fit = fit_orthonormal if self.method == METHOD_ORTHONORMAL \
            else fit_normal_equations
        for k in self.lags:
            try:
                m = moment_set(win_trace, deriv, k * self.step_s,
                               min_pairs=self.min_pairs)
                self._models[k] = fit(m)
            except ValueError:
                self._models.pop(k, None)
