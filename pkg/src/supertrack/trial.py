"""Trial and experiment orchestration plus trial-log persistence.

A trial binds the signal generator, the closed-loop simulation, a supervisor
estimate and the selection classifier into one run under a named condition.
An experiment runs every (subject, condition) cell, assembles within-subject
metric tables and applies the statistical treatments.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics, signals, simcore, stats
from .config import PlatformConfig
from .errors import DegenerateDataError, LogParseError, StaleConfigWarning
from .metrics import MetricsReport

CONDITION_LABELS = ("uOff", "uVisual", "uHaptic")

_DISPLAY_MODES = {"uOff": "none", "uVisual": "visual", "uHaptic": "haptic"}

COLUMNS = ("t", "r1", "r2", "r3", "active_index", "u", "y", "selection")
_INT_COLUMNS = {"active_index", "selection"}


@dataclass(frozen=True)
class Condition:
    """Experimental condition; u_access controls the supervisor estimate."""

    label: str
    u_access: bool
    display_mode: str

    def __post_init__(self):
        if self.label not in CONDITION_LABELS:
            raise ValueError(f"unknown condition label {self.label!r}")
        expected = (self.label != "uOff", _DISPLAY_MODES[self.label])
        if (self.u_access, self.display_mode) != expected:
            raise ValueError(f"condition fields inconsistent with label {self.label!r}")

    @classmethod
    def from_label(cls, label: str) -> "Condition":
        if label not in CONDITION_LABELS:
            raise ValueError(f"unknown condition label {label!r}")
        return cls(label=label, u_access=label != "uOff",
                   display_mode=_DISPLAY_MODES[label])


@dataclass(frozen=True)
class TrialSeeds:
    reference_seed: int
    schedule_seed: int


def derive_trial_seeds(master_seed: int, subject: int, condition_index: int) -> TrialSeeds:
    """Split one master seed into per-trial seeds.

    The rule is SeedSequence([master_seed, subject, condition_index]) ->
    two 32-bit words, so any (subject, condition) cell is reproducible from
    the master seed alone. condition_index is the position of the label in
    CONDITION_LABELS, independent of presentation order.
    """
    ss = np.random.SeedSequence([master_seed, subject, condition_index])
    ref_seed, sched_seed = (int(x) for x in ss.generate_state(2))
    return TrialSeeds(reference_seed=ref_seed, schedule_seed=sched_seed)


@dataclass(frozen=True)
class ExperimentPlan:
    """Per-subject condition orders (seeded shuffles) and per-trial seeds."""

    subjects: int
    master_seed: int
    orders: tuple[tuple[str, ...], ...]
    duration: float = 90.0

    def __post_init__(self):
        if len(self.orders) != self.subjects:
            raise ValueError("one condition order per subject required")
        for order in self.orders:
            if sorted(order) != sorted(CONDITION_LABELS):
                raise ValueError("each subject must see each condition exactly once")

    def trial_seeds(self, subject: int, label: str) -> TrialSeeds:
        return derive_trial_seeds(self.master_seed, subject,
                                  CONDITION_LABELS.index(label))


def make_experiment_plan(subjects: int, master_seed: int,
                         duration: float = 90.0) -> ExperimentPlan:
    """Randomize condition order per subject from the master seed."""
    orders = []
    for subject in range(subjects):
        rng = np.random.default_rng(
            np.random.SeedSequence([master_seed, subject, 0xFACE])
        )
        order = tuple(np.array(CONDITION_LABELS)[rng.permutation(3)])
        orders.append(order)
    return ExperimentPlan(subjects=subjects, master_seed=master_seed,
                          orders=tuple(orders), duration=duration)


@dataclass
class TrialLog:
    """Synchronized per-trial record with identifying metadata."""

    metadata: dict
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if set(self.columns) != set(COLUMNS):
            raise ValueError(f"log must carry exactly the columns {COLUMNS}")
        if len(lengths) != 1:
            raise ValueError("all columns must share one length")

    def __eq__(self, other):
        if not isinstance(other, TrialLog):
            return NotImplemented
        return self.metadata == other.metadata and all(
            np.array_equal(self.columns[c], other.columns[c]) for c in COLUMNS
        )


def _selection_from_keys(key_events: list[tuple[float, int]],
                         times: np.ndarray) -> np.ndarray:
    """Hold each keypress until the next one (staircase resampling)."""
    sel = np.zeros(len(times), dtype=int)
    for t_key, key in sorted(key_events):
        sel[times >= t_key] = key
    return sel


# the per-trial delay search is capped well under the quarter-trial default:
# with switches arriving every few seconds, correlation peaks beyond a few
# seconds of lag are alignment accidents, and one such outlier can dominate a
# condition mean
REPORT_MAX_LAG_S = 5.0


def compute_report(truth: np.ndarray, selection: np.ndarray,
                   series_y: np.ndarray, series_r: np.ndarray,
                   sample_rate: float,
                   estimator_rms: float | None = None) -> MetricsReport:
    """Metrics shared by the offline pipeline and the live service."""
    accuracy = metrics.selection_accuracy(truth, selection)
    max_lag = min(metrics.default_max_lag(len(truth)),
                  int(round(REPORT_MAX_LAG_S * sample_rate)))
    try:
        delay = metrics.selection_delay(
            truth.astype(float), selection.astype(float), sample_rate, max_lag,
        )
    except DegenerateDataError:
        delay = None
    return MetricsReport(
        accuracy=accuracy,
        delay=delay,
        operator_rms=metrics.rms_error(series_y, series_r),
        estimator_rms=estimator_rms,
    )


def run_simulated_trial(
    condition: Condition,
    seeds: TrialSeeds,
    config: PlatformConfig,
    subject: int = 0,
) -> tuple[TrialLog, MetricsReport]:
    """Run one fully simulated trial (model operator, simulated supervisor)."""
    grid = config.grid
    ref_set = signals.make_reference_set(config.signals, seeds.reference_seed)
    trace = signals.build_switch_schedule(
        ref_set, config.switching, grid.duration, seeds.schedule_seed,
        scan_rate=grid.sample_rate,
    )
    series = simcore.simulate_closed_loop(ref_set, trace, config.operator, grid)
    kp = simcore.derive_operator_gain(config.operator)
    if condition.u_access:
        estimate = simcore.estimate_reference_with_u(series, kp)
    else:
        estimate = simcore.estimate_reference_without_u(series)
    sel = simcore.classify_target(estimate, ref_set, config.classifier)

    times = series.time
    refs = signals.reference_matrix(ref_set, times)
    truth = signals.active_index_series(trace, times)
    report = compute_report(
        truth, sel.selection, series.y, series.r_active, grid.sample_rate,
        estimator_rms=metrics.rms_error(estimate.r_hat, series.r_active),
    )
    log = TrialLog(
        metadata={
            "subject": subject,
            "condition": condition.label,
            "reference_seed": seeds.reference_seed,
            "schedule_seed": seeds.schedule_seed,
            "sample_rate": grid.sample_rate,
            "duration": grid.duration,
            "config_digest": config.digest(),
        },
        columns={
            "t": times,
            "r1": refs[0],
            "r2": refs[1],
            "r3": refs[2],
            "active_index": truth,
            "u": series.u,
            "y": series.y,
            "selection": sel.selection,
        },
    )
    return log, report


def _format_cell(value, column: str) -> str:
    if column in _INT_COLUMNS:
        return str(int(value))
    return repr(float(value))


def write_log(log: TrialLog, path: str | Path) -> None:
    """CSV body under a '# key: value' metadata header, full precision."""
    path = Path(path)
    lines = [f"# {k}: {_meta_to_str(v)}" for k, v in log.metadata.items()]
    lines.append(",".join(COLUMNS))
    n = len(log.columns["t"])
    cols = [log.columns[c] for c in COLUMNS]
    for i in range(n):
        lines.append(",".join(_format_cell(col[i], name)
                              for name, col in zip(COLUMNS, cols)))
    path.write_text("\n".join(lines) + "\n")


def _meta_to_str(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _meta_from_str(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    if text in ("True", "False"):
        return text == "True"
    return text


def read_log(path: str | Path,
             expected_digest: str | None = None) -> TrialLog:
    """Parse a trial log; the inverse of write_log, exact round trip."""
    path = Path(path)
    lines = path.read_text().splitlines()
    metadata: dict = {}
    header_index = None
    for i, line in enumerate(lines):
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" not in body:
                raise LogParseError("metadata line missing ':'", line=i + 1)
            key, _, value = body.partition(":")
            metadata[key.strip()] = _meta_from_str(value.strip())
        else:
            header_index = i
            break
    if header_index is None or lines[header_index].split(",") != list(COLUMNS):
        raise LogParseError("missing or wrong column header",
                            line=(header_index or 0) + 1)
    raw = {c: [] for c in COLUMNS}
    for i, line in enumerate(lines[header_index + 1:], start=header_index + 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(COLUMNS):
            raise LogParseError(
                f"expected {len(COLUMNS)} fields, found {len(parts)}", line=i
            )
        for name, cell in zip(COLUMNS, parts):
            try:
                raw[name].append(int(cell) if name in _INT_COLUMNS else float(cell))
            except ValueError:
                raise LogParseError(f"bad value {cell!r}", line=i, column=name)
    if not raw["t"]:
        raise LogParseError("log has no samples", line=header_index + 2)
    columns = {
        c: np.asarray(raw[c], dtype=int if c in _INT_COLUMNS else float)
        for c in COLUMNS
    }
    if expected_digest is not None and metadata.get("config_digest") != expected_digest:
        warnings.warn(
            f"log {path.name}: config digest {metadata.get('config_digest')!r} "
            f"differs from active config {expected_digest!r}",
            StaleConfigWarning,
        )
    return TrialLog(metadata=metadata, columns=columns)


def report_from_log(log: TrialLog) -> MetricsReport:
    """Recompute the trial metrics from persisted columns only."""
    return compute_report(
        log.columns["active_index"],
        log.columns["selection"],
        log.columns["y"],
        _shown_reference(log),
        float(log.metadata["sample_rate"]),
    )


def _shown_reference(log: TrialLog) -> np.ndarray:
    refs = np.stack([log.columns["r1"], log.columns["r2"], log.columns["r3"]])
    return refs[log.columns["active_index"] - 1, np.arange(refs.shape[1])]


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    logs: list[TrialLog]
    reports: dict[tuple[int, str], MetricsReport]
    tables: dict[str, stats.WithinSubjectsTable]
    anova: dict[str, stats.AnovaResult | str]
    posthoc: dict[str, stats.PosthocResult | str]
    summary_csv: str
    summary_text: str
    flags: list[str] = field(default_factory=list)


def _run_cell(args) -> tuple[int, str, TrialLog, MetricsReport]:
    subject, label, master_seed, config = args
    condition = Condition.from_label(label)
    seeds = derive_trial_seeds(master_seed, subject, CONDITION_LABELS.index(label))
    log, report = run_simulated_trial(condition, seeds, config, subject=subject)
    return subject, label, log, report


def run_experiment(plan: ExperimentPlan, config: PlatformConfig,
                   jobs: int = 1) -> ExperimentResult:
    """One simulated trial per (subject, condition), then the statistics."""
    cells = [
        (subject, label, plan.master_seed, config)
        for subject in range(plan.subjects)
        for label in plan.orders[subject]
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(c) for c in cells]

    outcomes.sort(key=lambda o: (o[0], CONDITION_LABELS.index(o[1])))
    logs = [o[2] for o in outcomes]
    reports = {(o[0], o[1]): o[3] for o in outcomes}
    return analyze_reports(plan, reports, logs)


def analyze_reports(
    plan: ExperimentPlan,
    reports: dict[tuple[int, str], MetricsReport],
    logs: list[TrialLog] | None = None,
) -> ExperimentResult:
    """Assemble metric tables from per-trial reports and run the statistics."""
    flags: list[str] = []
    tables = {}
    matrices = {"accuracy": [], "delay": [], "operator_rms": []}
    for subject in range(plan.subjects):
        acc_row, delay_row, rms_row = [], [], []
        for label in CONDITION_LABELS:
            rep = reports[(subject, label)]
            acc_row.append(rep.accuracy)
            rms_row.append(rep.operator_rms)
            if rep.delay is None:
                flags.append(f"degenerate delay: subject {subject}, {label}")
                delay_row.append(np.nan)
            else:
                delay_row.append(rep.delay)
        matrices["accuracy"].append(acc_row)
        matrices["delay"].append(delay_row)
        matrices["operator_rms"].append(rms_row)

    anova: dict[str, stats.AnovaResult | str] = {}
    posthoc: dict[str, stats.PosthocResult | str] = {}
    for name in ("accuracy", "delay"):
        mat = np.asarray(matrices[name])
        if np.isnan(mat).any():
            msg = f"{name}: table incomplete (degenerate trials), stats skipped"
            anova[name] = msg
            posthoc[name] = msg
            flags.append(msg)
            continue
        table = stats.WithinSubjectsTable(values=mat, condition_labels=CONDITION_LABELS)
        tables[name] = table
        try:
            anova[name] = stats.rm_anova(table)
        except DegenerateDataError as exc:
            anova[name] = f"{name}: {exc}"
            flags.append(str(anova[name]))
        posthoc[name] = stats.bonferroni_posthoc(table)
    rms_mat = np.asarray(matrices["operator_rms"])
    tables["operator_rms"] = stats.WithinSubjectsTable(
        values=rms_mat, condition_labels=CONDITION_LABELS
    )

    summary_csv, summary_text = stats.summarize_conditions(tables)
    return ExperimentResult(
        plan=plan, logs=logs or [], reports=reports, tables=tables,
        anova=anova, posthoc=posthoc,
        summary_csv=summary_csv, summary_text=summary_text, flags=flags,
    )
