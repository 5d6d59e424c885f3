"""Pseudo-random reference signals and the target-switching schedule.

Three sum-of-sinusoids references share one frequency/amplitude table and
differ only in their per-component phases, so they are statistically alike
but mutually distinct. A switching schedule decides which of the three the
operator's target follows at any instant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

DEFAULT_BASE_FREQUENCY_HZ = 0.025
DEFAULT_MULTIPLES = (6, 10, 15, 23, 37, 57, 97, 154, 289, 527)
DEFAULT_AMPLITUDES = (20.0,) * 8 + (1.0,) * 2
# Raw amplitudes sum to 162; this default scale puts the signals in [-1, 1]
# so the switching thresholds below are read in normalized units.
DEFAULT_AMPLITUDE_SCALE = 1.0 / 162.0

NUM_REFERENCES = 3


@dataclass(frozen=True)
class SinusoidConfig:
    """Frequency/amplitude table shared by all references."""

    base_frequency: float = DEFAULT_BASE_FREQUENCY_HZ
    multiples: tuple[int, ...] = DEFAULT_MULTIPLES
    amplitudes: tuple[float, ...] = DEFAULT_AMPLITUDES
    amplitude_scale: float = DEFAULT_AMPLITUDE_SCALE

    def __post_init__(self):
        if len(self.multiples) != len(self.amplitudes) or len(self.multiples) < 1:
            raise ConfigError(
                f"multiples ({len(self.multiples)}) and amplitudes "
                f"({len(self.amplitudes)}) must have equal length >= 1"
            )
        if self.base_frequency <= 0:
            raise ConfigError("base_frequency must be positive")
        if self.amplitude_scale <= 0:
            raise ConfigError("amplitude_scale must be positive")
        if any(m <= 0 for m in self.multiples):
            raise ConfigError("multiples must be positive")
        if any(b <= a for a, b in zip(self.multiples, self.multiples[1:])):
            raise ConfigError("multiples must be strictly increasing")
        if any(a < 0 for a in self.amplitudes):
            raise ConfigError("amplitudes must be nonnegative")

    @property
    def frequencies(self) -> np.ndarray:
        """Component frequencies in Hz."""
        return self.base_frequency * np.asarray(self.multiples, dtype=float)

    @property
    def scaled_amplitudes(self) -> np.ndarray:
        return self.amplitude_scale * np.asarray(self.amplitudes, dtype=float)

    @property
    def signal_bound(self) -> float:
        """Upper bound on |r_i(t)|: the sum of scaled amplitudes."""
        return float(self.scaled_amplitudes.sum())


@dataclass(frozen=True)
class ReferenceSet:
    """Three references: shared config plus a 3 x K phase matrix in [0, 2*pi)."""

    config: SinusoidConfig
    phases: np.ndarray

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float)
        if phases.shape != (NUM_REFERENCES, len(self.config.multiples)):
            raise ConfigError(
                f"phases must have shape (3, {len(self.config.multiples)}), "
                f"got {phases.shape}"
            )
        if (phases < 0).any() or (phases >= 2 * np.pi).any():
            raise ConfigError("phases must lie in [0, 2*pi)")
        object.__setattr__(self, "phases", phases)


@dataclass(frozen=True)
class SwitchParams:
    """Thresholds controlling when the active target may switch."""

    eps_pos: float = 0.05      # max |r_i - r_j| at a switch, signal units
    eps_vel: float = 0.2       # max |rdot_i - rdot_j| at a switch, units/s
    min_dwell: float = 1.5625  # minimum time between switches, s

    def __post_init__(self):
        if self.eps_pos <= 0 or self.eps_vel <= 0 or self.min_dwell <= 0:
            raise ConfigError("switch thresholds must all be positive")


@dataclass(frozen=True)
class ActiveTargetTrace:
    """Piecewise-constant record of which reference the target follows.

    ``switches`` is an ordered list of (time_s, new_index) pairs with indices
    in {1, 2, 3}; the trace is right-continuous at switch instants.
    """

    initial_index: int
    switches: tuple[tuple[float, int], ...]
    duration: float

    def __post_init__(self):
        if self.initial_index not in (1, 2, 3):
            raise ConfigError("initial_index must be in {1, 2, 3}")
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        prev_t, prev_i = -np.inf, self.initial_index
        for t, i in self.switches:
            if i not in (1, 2, 3):
                raise ConfigError("switch indices must be in {1, 2, 3}")
            if not 0 <= t <= self.duration:
                raise ConfigError("switch times must lie within [0, duration]")
            if t <= prev_t:
                raise ConfigError("switch times must be strictly increasing")
            if i == prev_i:
                raise ConfigError("consecutive switch indices must differ")
            prev_t, prev_i = t, i


def make_reference_set(config: SinusoidConfig, seed: int) -> ReferenceSet:
    """Draw the 3 x K phase matrix uniformly from [0, 2*pi).

    Uses numpy's PCG64 generator; identical (config, seed) pairs reproduce
    bit-identical sets. Row i holds the phases of reference i+1.
    """
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2 * np.pi, size=(NUM_REFERENCES, len(config.multiples)))
    return ReferenceSet(config=config, phases=phases)


def _check_index(i: int) -> None:
    if i not in (1, 2, 3):
        raise ValueError(f"reference index must be in {{1, 2, 3}}, got {i}")


def sample_reference(ref_set: ReferenceSet, i: int, t) -> float | np.ndarray:
    """Position of reference i at time(s) t.

    Returns amplitude_scale * sum_k A[k] * sin(2*pi*f[k]*t + phi_i[k]).
    ``t`` may be a scalar or an array; the result matches its shape.
    """
    _check_index(i)
    cfg = ref_set.config
    t_arr = np.asarray(t, dtype=float)
    arg = 2 * np.pi * np.multiply.outer(t_arr, cfg.frequencies) + ref_set.phases[i - 1]
    out = np.sin(arg) @ cfg.scaled_amplitudes
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def sample_reference_rate(ref_set: ReferenceSet, i: int, t) -> float | np.ndarray:
    """Analytic velocity of reference i at time(s) t."""
    _check_index(i)
    cfg = ref_set.config
    t_arr = np.asarray(t, dtype=float)
    omega = 2 * np.pi * cfg.frequencies
    arg = np.multiply.outer(t_arr, omega) + ref_set.phases[i - 1]
    out = np.cos(arg) @ (cfg.scaled_amplitudes * omega)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def reference_matrix(ref_set: ReferenceSet, times: np.ndarray) -> np.ndarray:
    """All three references sampled on a time grid, shape (3, len(times))."""
    return np.stack([sample_reference(ref_set, i, times) for i in (1, 2, 3)])


def reference_rate_matrix(ref_set: ReferenceSet, times: np.ndarray) -> np.ndarray:
    """All three reference velocities on a time grid, shape (3, len(times))."""
    return np.stack([sample_reference_rate(ref_set, i, times) for i in (1, 2, 3)])


def build_switch_schedule(
    ref_set: ReferenceSet,
    params: SwitchParams,
    duration: float,
    seed: int,
    scan_rate: float = 100.0,
) -> ActiveTargetTrace:
    """Generate the switching schedule by scanning the simulation grid.

    The initial index is drawn uniformly (seeded). Scanning time steps at
    ``scan_rate``, the target switches from i to the first eligible j where
    |r_i - r_j| < eps_pos, |rdot_i - rdot_j| < eps_vel, and at least
    ``min_dwell`` seconds have passed since the previous switch (trial start
    counts as a switch for this purpose). Ties among eligible j are broken
    uniformly at random by the same seeded generator.

    Args:
        ref_set: the three references to schedule over.
        params: switching thresholds.
        duration: trace length, s.
        seed: drives the initial-index draw and all tie-breaks.
        scan_rate: grid frequency at which conditions are evaluated, Hz.

    Returns:
        ActiveTargetTrace covering [0, duration].
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if scan_rate <= 0:
        raise ValueError("scan_rate must be positive")

    rng = np.random.default_rng(seed)
    cur = int(rng.integers(1, NUM_REFERENCES + 1))
    initial = cur

    n_steps = int(round(duration * scan_rate)) + 1
    times = np.arange(n_steps) / scan_rate
    pos = reference_matrix(ref_set, times)
    vel = reference_rate_matrix(ref_set, times)

    # eligible[i, j, n]: switching i+1 -> j+1 is allowed at step n
    eligible = (
        (np.abs(pos[:, None, :] - pos[None, :, :]) < params.eps_pos)
        & (np.abs(vel[:, None, :] - vel[None, :, :]) < params.eps_vel)
        & ~np.eye(NUM_REFERENCES, dtype=bool)[:, :, None]
    )

    dwell_steps = params.min_dwell * scan_rate
    switches: list[tuple[float, int]] = []
    last_switch_step = 0  # trial start anchors the dwell clock
    for n in range(n_steps):
        if n - last_switch_step < dwell_steps:
            continue
        row = eligible[cur - 1, :, n]
        if row.any():
            candidates = np.flatnonzero(row) + 1
            cur = int(rng.choice(candidates))
            switches.append((float(times[n]), cur))
            last_switch_step = n
    return ActiveTargetTrace(initial_index=initial, switches=tuple(switches), duration=duration)


def active_index(trace: ActiveTargetTrace, t: float) -> int:
    """Reference index in force at time t (right-continuous at switches)."""
    if not 0 <= t <= trace.duration:
        raise ValueError(f"t={t} outside [0, {trace.duration}]")
    idx = trace.initial_index
    for ts, i in trace.switches:
        if ts <= t:
            idx = i
        else:
            break
    return idx


def active_index_series(trace: ActiveTargetTrace, times: np.ndarray) -> np.ndarray:
    """Vectorized ``active_index`` over a sorted time grid."""
    times = np.asarray(times, dtype=float)
    if len(times) and (times[0] < 0 or times[-1] > trace.duration):
        raise ValueError("times outside [0, duration]")
    out = np.full(len(times), trace.initial_index, dtype=int)
    for ts, i in trace.switches:
        out[times >= ts] = i
    return out
