"""Per-trial performance metrics: selection accuracy, selection delay, RMS error.

Selection delay is classic cross-correlation delay estimation: the lag at
which the normalized cross-correlation of the truth and selection staircases
has its largest absolute value. ``normalized_xcorr`` itself applies no
demeaning; ``selection_delay`` removes the staircases' shared index offset
first, since its overlap term otherwise swamps the alignment peak.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError


@dataclass(frozen=True)
class SelectionTrace:
    """Supervisor selections on a uniform grid; 0 means no selection yet."""

    time: np.ndarray
    selection: np.ndarray

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float)
        sel = np.asarray(self.selection, dtype=int)
        if time.shape != sel.shape:
            raise ValueError("time and selection must have equal length")
        if not np.isin(sel, (0, 1, 2, 3)).all():
            raise ValueError("selections must be in {0, 1, 2, 3}")
        nz = np.flatnonzero(sel)
        if len(nz) and (sel[nz[0]:] == 0).any():
            raise ValueError("selection must stay nonzero once a choice is made")
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "selection", sel)


@dataclass(frozen=True)
class MetricsReport:
    """Per-trial summary; ``delay`` is None when the staircases are degenerate."""

    accuracy: float
    delay: float | None
    operator_rms: float
    estimator_rms: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")
        if self.operator_rms < 0:
            raise ValueError("operator_rms must be nonnegative")


def selection_accuracy(truth: np.ndarray, sel: np.ndarray) -> float:
    """Fraction of samples where the selection equals the active index.

    Samples with sel == 0 (no selection yet) count as incorrect.
    """
    truth = np.asarray(truth)
    sel = np.asarray(sel)
    if truth.shape != sel.shape or truth.ndim != 1 or len(truth) == 0:
        raise ValueError("truth and selection must be equal-length 1-D arrays")
    return float(np.mean(sel == truth))


def normalized_xcorr(x: np.ndarray, y: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalized cross-correlation over lags -max_lag..max_lag.

    c[l] = sum_n x[n] * y[n+l] over valid n, divided by (||x|| * ||y||).
    No demeaning is applied. Values lie in [-1, 1] by Cauchy-Schwarz.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or len(x) != len(y):
        raise ValueError("inputs must be equal-length 1-D arrays")
    if not 0 <= max_lag < len(x):
        raise ValueError("max_lag must satisfy 0 <= max_lag < len(x)")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise DegenerateDataError("zero-energy input")
    full = _correlate_full(y, x)
    mid = len(x) - 1
    return full[mid - max_lag: mid + max_lag + 1] / (nx * ny)


def _correlate_full(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Full linear cross-correlation: out[l + len(x) - 1] = sum_n x[n] y[n+l].

    Computed as the FFT convolution of y with reversed x.
    """
    n = len(x) + len(y) - 1
    nfft = 1 << (n - 1).bit_length()
    spectrum = np.fft.rfft(y, nfft) * np.fft.rfft(x[::-1], nfft)
    return np.fft.irfft(spectrum, nfft)[:n]


def best_alignment_lag(ref: np.ndarray, sig: np.ndarray, max_lag: int) -> int:
    """Lag (samples) maximizing |normalized_xcorr(ref, sig)|.

    Positive means ``sig`` lags ``ref``. Ties are broken by the smallest
    absolute lag, then by the smaller (earlier) lag.
    """
    c = np.abs(normalized_xcorr(ref, sig, max_lag))
    lags = np.arange(-max_lag, max_lag + 1)
    # snap near-equal maxima before tie-breaking; FFT round-off otherwise
    # makes exact symmetric ties unstable
    candidates = lags[np.isclose(c, c.max(), rtol=1e-9, atol=1e-12)]
    return int(min(candidates, key=lambda l: (abs(l), l)))


def selection_delay(
    truth_staircase: np.ndarray,
    sel_staircase: np.ndarray,
    sample_rate: float,
    max_lag: int,
) -> float:
    """Selection delay in seconds from the extremal cross-correlation lag.

    Positive means the selection lags the truth staircase. The staircases
    are demeaned before correlating: the index values carry a large shared
    offset whose overlap term otherwise drowns the alignment peak for large
    lags and biases noisy staircases toward zero delay. Raises
    DegenerateDataError for constant inputs, where the lag is undefined.
    """
    truth = np.asarray(truth_staircase, dtype=float)
    sel = np.asarray(sel_staircase, dtype=float)
    if truth.shape != sel.shape:
        raise ValueError("staircases must have equal length")
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    if len(truth) == 0 or truth.max() == truth.min() or sel.max() == sel.min():
        raise DegenerateDataError("constant staircase: delay undefined")
    truth = truth - truth.mean()
    sel = sel - sel.mean()
    return best_alignment_lag(truth, sel, max_lag) / sample_rate


def default_max_lag(n_samples: int) -> int:
    """Default correlation search range: one quarter of the trial length."""
    return max(1, n_samples // 4)


def rms_error(a: np.ndarray, b: np.ndarray) -> float:
    """Root mean square difference sqrt(mean((a - b)^2))."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) == 0:
        raise ValueError("inputs must be equal-length nonempty 1-D arrays")
    return float(np.sqrt(np.mean((a - b) ** 2)))
