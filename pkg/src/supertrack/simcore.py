"""Closed-loop operator simulation and supervisor reference estimates.

The operator is a crossover-model controller: a pure gain with reaction
delay driving an integrator plant. A supervisor watching the loop builds an
estimate of the tracked reference either from the output alone (no command
access) or by adding a scaled copy of the command to the output. A simulated
supervisor turns either estimate into discrete target selections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import signals
from .errors import ConfigError
from .metrics import SelectionTrace, best_alignment_lag
from .signals import ActiveTargetTrace, ReferenceSet


@dataclass(frozen=True)
class OperatorParams:
    """Crossover-model operator over an integrator plant."""

    crossover_freq: float = 4.3   # open-loop unity-gain frequency, rad/s
    delay: float = 0.14           # operator reaction delay, s
    plant_gain: float = 1.0       # integrator gain, 1/s per command unit

    def __post_init__(self):
        if self.crossover_freq <= 0:
            raise ConfigError("crossover_freq must be positive")
        if self.delay < 0:
            raise ConfigError("delay must be nonnegative")
        if self.plant_gain == 0:
            raise ConfigError("plant_gain must be nonzero")


@dataclass(frozen=True)
class SimGrid:
    """Fixed-step simulation grid."""

    sample_rate: float = 100.0
    duration: float = 90.0

    def __post_init__(self):
        if self.sample_rate <= 0 or self.duration <= 0:
            raise ConfigError("sample_rate and duration must be positive")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate)) + 1

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate


@dataclass(frozen=True)
class TrialSeries:
    """Synchronized command / output / shown-reference time series."""

    time: np.ndarray
    u: np.ndarray
    y: np.ndarray
    r_active: np.ndarray

    def __post_init__(self):
        n = len(self.time)
        if not (len(self.u) == len(self.y) == len(self.r_active) == n):
            raise ValueError("all series must share one length")


@dataclass(frozen=True)
class EstimateSeries:
    """A supervisor's reconstruction of the tracked reference."""

    time: np.ndarray
    r_hat: np.ndarray

    def __post_init__(self):
        if len(self.time) != len(self.r_hat):
            raise ValueError("time and r_hat must have equal length")


@dataclass(frozen=True)
class ClassifierParams:
    """Simulated-supervisor tuning.

    The classifier is a three-state switching filter: per-step residual
    evidence from a trailing signed-mean window feeds a forward pass whose
    transition prior expects ``switch_rate`` target changes per second.
    ``dwell`` is the minimum hold time between emitted selection changes and
    ``margin`` the log-posterior advantage a challenger needs to take over.
    """

    window: float = 0.75       # residual-averaging window, s
    dwell: float = 0.25        # minimum hold between selection changes, s
    margin: float = 0.0        # required log-posterior advantage
    switch_rate: float = 0.15  # prior expected switches per second

    def __post_init__(self):
        if self.window <= 0:
            raise ConfigError("window must be positive")
        if self.dwell < 0 or self.margin < 0:
            raise ConfigError("dwell and margin must be nonnegative")
        if self.switch_rate <= 0:
            raise ConfigError("switch_rate must be positive")


def derive_operator_gain(params: OperatorParams) -> float:
    """Controller gain K_p = crossover_freq / plant_gain.

    This is the unique gain that puts the open-loop magnitude
    |K_p * K_c / (j*omega)| at unity at the crossover frequency.
    """
    if params.plant_gain == 0:
        raise ValueError("plant_gain must be nonzero")
    return params.crossover_freq / params.plant_gain


def simulate_closed_loop(
    ref_set: ReferenceSet,
    trace: ActiveTargetTrace,
    params: OperatorParams,
    grid: SimGrid,
) -> TrialSeries:
    """Run the fixed-step loop: delayed-gain controller on an integrator.

    Per step: e[n] = r[n] - y[n]; u[n] = K_p * e[n-d] with zero pre-history,
    where d = round(delay * sample_rate); y[n+1] = y[n] + dt * K_c * u[n];
    y[0] = 0.
    """
    if trace.duration < grid.duration:
        raise ValueError(
            f"trace duration {trace.duration} s shorter than grid duration {grid.duration} s"
        )
    kp = derive_operator_gain(params)
    d = int(round(params.delay * grid.sample_rate))
    n = grid.n_samples
    dt = grid.dt

    times = grid.times()
    active = signals.active_index_series(trace, times)
    refs = signals.reference_matrix(ref_set, times)
    r = refs[active - 1, np.arange(n)]

    u = np.zeros(n)
    y = np.zeros(n)
    e = np.zeros(n)
    kc = params.plant_gain
    for i in range(n):
        e[i] = r[i] - y[i]
        u[i] = kp * e[i - d] if i >= d else 0.0
        if i + 1 < n:
            y[i + 1] = y[i] + dt * kc * u[i]
    return TrialSeries(time=times, u=u, y=y, r_active=r)


def estimate_reference_with_u(series: TrialSeries, kp: float) -> EstimateSeries:
    """Command-informed estimate r_hat = u / K_p + y."""
    if kp == 0:
        raise ValueError("kp must be nonzero")
    return EstimateSeries(time=series.time, r_hat=series.u / kp + series.y)


def estimate_reference_without_u(series: TrialSeries) -> EstimateSeries:
    """Without command access the output itself is the best available estimate."""
    return EstimateSeries(time=series.time, r_hat=series.y)


def classify_target(
    estimate: EstimateSeries,
    ref_set: ReferenceSet,
    cparams: ClassifierParams = ClassifierParams(),
) -> SelectionTrace:
    """Convert a reference estimate into discrete target selections.

    Evidence per step is the trailing-window signed-mean residual against
    each reference (instantaneous residual before the first full window);
    signed averaging cancels the high-frequency estimator noise that a
    rectified distance would retain. A three-state forward pass accumulates
    the evidence under a switching prior, and the emitted selection follows
    the posterior argmax, changing only when the challenger's log-posterior
    advantage exceeds ``margin`` and the current choice has been held for at
    least ``dwell`` seconds. Ties resolve to the lowest index. Deterministic,
    and invariant under common scaling of the estimate and references.
    """
    n = len(estimate.r_hat)
    if n == 0:
        raise ValueError("empty estimate")
    times = np.asarray(estimate.time, dtype=float)
    if n > 1:
        fs = 1.0 / (times[1] - times[0])
    else:
        fs = 1.0
    refs = signals.reference_matrix(ref_set, times)
    w = max(1, int(round(cparams.window * fs)))
    hold = int(round(cparams.dwell * fs))

    diff = estimate.r_hat[None, :] - refs
    dists = np.abs(diff)
    if n >= w:
        csum = np.concatenate([np.zeros((3, 1)), np.cumsum(diff, axis=1)], axis=1)
        dists[:, w - 1:] = np.abs((csum[:, w:] - csum[:, :-w]) / w)

    # residual scale from the best-fitting reference, floored at a fraction of
    # the reference amplitude: differences below that resolution carry no
    # evidence, which keeps near-exact estimates from flipping on the brief
    # zero crossings of the signed-mean distance to a non-tracked reference
    ref_scale = float(np.sqrt(np.mean(refs**2))) or 1.0
    sigma = max(float(np.sqrt(np.mean(dists.min(axis=0) ** 2))), 1e-3 * ref_scale)

    rho = min(cparams.switch_rate / fs, 0.5)
    evidence_weight = min(1.0 / (cparams.window * fs), 1.0)

    # per-step log-likelihood increments, precomputed; the filter itself runs
    # on scalars (the per-step numpy overhead would dominate otherwise)
    ll_rows = (-0.5 * (dists / sigma) ** 2 * evidence_weight).tolist()
    d_rows = dists.tolist()
    lp = [math.log(1.0 / 3.0)] * 3
    selection = np.empty(n, dtype=int)
    current = 0
    last_change = -hold - 1
    exact_candidate = -1
    exact_run = 0
    min_run = max(hold, 1)
    for i in range(n):
        lp = [lp[k] + ll_rows[k][i] for k in range(3)]
        m = max(lp)
        p = [math.exp(v - m) for v in lp]
        s = p[0] + p[1] + p[2]
        p = [v / s for v in p]
        p = [(1.0 - rho) * v + rho * (1.0 - v) / 2.0 for v in p]
        lp = [math.log(v) for v in p]
        best = 0 if lp[0] >= lp[1] and lp[0] >= lp[2] else (1 if lp[1] >= lp[2] else 2)

        # fast path: a reference matching the estimate exactly while the
        # incumbent shows any discrepancy wins after ``dwell`` seconds; this
        # keeps the switch-following lag within window + dwell for exact
        # estimates, where posterior inertia alone could respond late
        d0, d1, d2 = d_rows[0][i], d_rows[1][i], d_rows[2][i]
        zeros = (d0 == 0.0) + (d1 == 0.0) + (d2 == 0.0)
        if zeros == 1 and (d0, d1, d2)[current] > 0.0:
            cand = 0 if d0 == 0.0 else (1 if d1 == 0.0 else 2)
            if cand == exact_candidate:
                exact_run += 1
            else:
                exact_candidate = cand
                exact_run = 1
        else:
            exact_candidate = -1
            exact_run = 0

        if i == 0:
            current = best
        elif exact_run >= min_run:
            current = exact_candidate
            last_change = i
            exact_candidate = -1
            exact_run = 0
            # condition the posterior on the adopted exact match so it does
            # not drag the selection back while its deficit decays
            hi, lo = 1.0 - rho, rho / 2.0
            p = [lo, lo, lo]
            p[current] = hi
            s = hi + 2.0 * lo
            lp = [math.log(v / s) for v in p]
        elif (
            best != current
            and (d0, d1, d2)[current] > 0.0
            and lp[best] - lp[current] > cparams.margin
            and i - last_change > hold
        ):
            current = best
            last_change = i
        selection[i] = current + 1
    return SelectionTrace(time=times, selection=selection)


def xcorr_lead_lag(
    a: np.ndarray, b: np.ndarray, ref: np.ndarray, max_lag: int
) -> tuple[int, int]:
    """Best-alignment lags (samples) of a and b against ref.

    Positive lag means the signal trails the reference. Used to check that
    the command-informed estimate aligns with the reference no later than
    the raw output does.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if not (len(a) == len(b) == len(ref)):
        raise ValueError("a, b and ref must have equal length")
    return (
        best_alignment_lag(ref, a, max_lag),
        best_alignment_lag(ref, b, max_lag),
    )
