"""Acceptance criteria, one test per criterion, each printing PASS or FAIL.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines. Tolerances are stated inline; none are deferred to calibration.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate, special

from supertrack import metrics, signals, simcore, stats
from supertrack.config import PlatformConfig, ServiceSettings
from supertrack.metrics import best_alignment_lag, selection_delay
from supertrack.signals import (
    SinusoidConfig,
    SwitchParams,
    active_index_series,
    build_switch_schedule,
    make_reference_set,
    sample_reference,
    sample_reference_rate,
)
from supertrack.simcore import (
    OperatorParams,
    SimGrid,
    classify_target,
    derive_operator_gain,
    estimate_reference_with_u,
    estimate_reference_without_u,
    simulate_closed_loop,
)
from supertrack.trial import (
    CONDITION_LABELS,
    Condition,
    derive_trial_seeds,
    read_log,
    report_from_log,
    run_simulated_trial,
    write_log,
)

GRID = SimGrid(sample_rate=100.0, duration=90.0)
OPERATOR = OperatorParams()
KP = derive_operator_gain(OPERATOR)
N_TRIALS = 100


def _report(name: str, ok: bool, detail: str) -> bool:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


@pytest.fixture(scope="module")
def monte_carlo_trials():
    """100 seeded 90 s closed-loop trials with both estimates and lags."""
    t0 = time.perf_counter()
    rows = []
    cfg = SinusoidConfig()
    for seed in range(N_TRIALS):
        ts = derive_trial_seeds(20_000, seed, 0)
        ref_set = make_reference_set(cfg, ts.reference_seed)
        trace = build_switch_schedule(ref_set, SwitchParams(), GRID.duration,
                                      ts.schedule_seed, scan_rate=GRID.sample_rate)
        series = simulate_closed_loop(ref_set, trace, OPERATOR, GRID)
        r_hat = estimate_reference_with_u(series, KP).r_hat
        lag_rhat, lag_y = simcore.xcorr_lead_lag(
            r_hat, series.y, series.r_active, max_lag=300
        )
        rows.append({
            "rms_y": metrics.rms_error(series.y, series.r_active),
            "rms_rhat": metrics.rms_error(r_hat, series.r_active),
            "lag_rhat": lag_rhat,
            "lag_y": lag_y,
        })
    elapsed = time.perf_counter() - t0
    return rows, elapsed


def test_criterion_1_rms_ratio_reproduction(monte_carlo_trials):
    rows, elapsed = monte_carlo_trials
    mean_y = np.mean([r["rms_y"] for r in rows])
    mean_rhat = np.mean([r["rms_rhat"] for r in rows])
    ratio = mean_rhat / mean_y
    frac_better = np.mean([r["rms_rhat"] < r["rms_y"] for r in rows])
    ok = (abs(ratio - 0.697) <= 0.15) and (frac_better >= 0.95) and (elapsed < 30.0)
    assert _report(
        "criterion 1 (RMS ratio 0.697 +/- 0.15, ordering >= 95%)",
        ok,
        f"ratio = {ratio:.4f}, ordering fraction = {frac_better:.2f}, "
        f"runtime = {elapsed:.1f} s over {len(rows)} trials",
    ), (
        "The command-informed estimate is not RMS-better under the default "
        "spectrum: components above ~7.5 rad/s are amplified in the estimate "
        "error by up to 2x. See the decisions ledger for the full analysis."
    )


def test_criterion_2_estimator_identity_zero_delay():
    params = OperatorParams(delay=0.0)
    cfg = SinusoidConfig()
    worst = 0.0
    for seed in (1, 2, 3):
        ts = derive_trial_seeds(21_000, seed, 0)
        ref_set = make_reference_set(cfg, ts.reference_seed)
        trace = build_switch_schedule(ref_set, SwitchParams(), GRID.duration,
                                      ts.schedule_seed, scan_rate=GRID.sample_rate)
        series = simulate_closed_loop(ref_set, trace, params, GRID)
        r_hat = estimate_reference_with_u(series, derive_operator_gain(params)).r_hat
        worst = max(worst, float(np.max(np.abs(r_hat - series.r_active))))
    bound = cfg.signal_bound
    ok = worst <= 1e-9 * bound
    assert _report(
        "criterion 2 (zero-delay estimator identity)",
        ok,
        f"max |r_hat - r| = {worst:.3e} vs bound {1e-9 * bound:.3e}",
    )


def test_criterion_3_phase_lead(monte_carlo_trials):
    rows, _ = monte_carlo_trials
    frac = np.mean([r["lag_rhat"] <= r["lag_y"] for r in rows])
    ok = frac >= 0.95
    assert _report(
        "criterion 3 (estimate aligns no later than output on >= 95% of seeds)",
        ok,
        f"fraction = {frac:.2f} over {len(rows)} seeds "
        f"(mean lags {np.mean([r['lag_rhat'] for r in rows]):.1f} vs "
        f"{np.mean([r['lag_y'] for r in rows]):.1f} samples)",
    )


def test_criterion_4_switching_invariants():
    cfg = SinusoidConfig()
    params = SwitchParams()
    total_switches = 0
    violations = 0
    seed = 0
    while total_switches < 1000:
        ref_set = make_reference_set(cfg, seed)
        trace = build_switch_schedule(ref_set, params, GRID.duration, seed + 1,
                                      scan_rate=GRID.sample_rate)
        prev_t, prev_i = 0.0, trace.initial_index
        for t, i in trace.switches:
            dp = abs(sample_reference(ref_set, prev_i, t)
                     - sample_reference(ref_set, i, t))
            dv = abs(sample_reference_rate(ref_set, prev_i, t)
                     - sample_reference_rate(ref_set, i, t))
            if not (i != prev_i and dp < params.eps_pos and dv < params.eps_vel
                    and t - prev_t >= params.min_dwell - 1e-12):
                violations += 1
            prev_t, prev_i = t, i
        total_switches += len(trace.switches)
        seed += 1

    # 40 s periodicity of every reference at 1e-9 of the signal bound
    ref_set = make_reference_set(cfg, 12345)
    t_grid = np.linspace(0.0, 50.0, 2001)
    periodicity = max(
        float(np.max(np.abs(sample_reference(ref_set, i, t_grid + 40.0)
                            - sample_reference(ref_set, i, t_grid))))
        for i in (1, 2, 3)
    )
    ok = violations == 0 and periodicity < 1e-9 * cfg.signal_bound
    assert _report(
        "criterion 4 (switch rules on >= 1000 switches, 40 s periodicity)",
        ok,
        f"{total_switches} switches, {violations} violations, "
        f"periodicity residual = {periodicity:.2e}",
    )


def test_criterion_5_delay_recovers_shifts():
    cfg = SinusoidConfig()
    ref_set = make_reference_set(cfg, 77)
    trace = build_switch_schedule(ref_set, SwitchParams(), GRID.duration, 78,
                                  scan_rate=GRID.sample_rate)
    truth = active_index_series(trace, GRID.times()).astype(float)
    max_lag = len(truth) // 4
    failures = []
    for lag in (-max_lag, -1234, -157, -10, -1, 0, 1, 10, 157, 1234, max_lag):
        shifted = np.empty_like(truth)
        if lag >= 0:
            shifted[lag:] = truth[: len(truth) - lag]
            shifted[:lag] = truth[0]
        else:
            shifted[:lag] = truth[-lag:]
            shifted[lag:] = truth[-1]
        got = selection_delay(truth, shifted, GRID.sample_rate, max_lag)
        if got != lag / GRID.sample_rate:
            failures.append((lag, got))
    ok = not failures
    assert _report(
        "criterion 5 (delay metric recovers integer shifts exactly)",
        ok,
        "all shifts recovered" if ok else f"failures: {failures}",
    )


def _f_tail_quad(f_value, df1, df2):
    def pdf(x):
        a, b = df1 / 2.0, df2 / 2.0
        return math.exp(a * math.log(df1 / df2) + (a - 1) * math.log(x)
                        - (a + b) * math.log1p(df1 * x / df2)
                        - special.betaln(a, b))
    return integrate.quad(pdf, f_value, np.inf, limit=200)[0]


def _t_tail_quad(t_value, df):
    def pdf(x):
        return math.exp(-((df + 1) / 2.0) * math.log1p(x * x / df)
                        - 0.5 * math.log(df) - special.betaln(0.5, df / 2.0))
    return 2.0 * integrate.quad(pdf, abs(t_value), np.inf, limit=200)[0]


def test_criterion_6_statistics_oracles():
    rng = np.random.default_rng(99)
    worst_partition = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        k = int(rng.integers(2, 6))
        table = stats.WithinSubjectsTable(
            values=rng.normal(size=(n, k)) * rng.uniform(0.5, 20.0),
            condition_labels=tuple(f"c{j}" for j in range(k)),
        )
        res = stats.rm_anova(table)
        rel = abs(res.ss_total - (res.ss_effect + res.ss_subjects + res.ss_error))
        worst_partition = max(worst_partition, rel / max(res.ss_total, 1e-30))

    closed_form = (1.0 + 2.0 * 3.56 / 18.0) ** (-9.0)
    f_err = abs(stats.f_upper_tail(3.56, 2, 18) - closed_form)

    tail_err = 0.0
    for f_value in (0.25, 1.0, 3.56, 6.5):
        for df1, df2 in [(1, 6), (2, 18), (4, 30)]:
            tail_err = max(tail_err, abs(
                stats.f_upper_tail(f_value, df1, df2) - _f_tail_quad(f_value, df1, df2)))
    for t_value in (0.5, 2.101, 3.4641):
        for df in (2, 9, 18):
            tail_err = max(tail_err, abs(
                stats.t_two_sided(t_value, df) - _t_tail_quad(t_value, df)))

    hand = stats.rm_anova(stats.WithinSubjectsTable(
        values=[[1.0, 2.0], [2.0, 2.0]], condition_labels=("a", "b")))
    hand_ok = (hand.ss_subjects, hand.ss_effect, hand.ss_error, hand.F) == \
        (0.25, 0.25, 0.25, 1.0)

    ok = (worst_partition <= 1e-9 and f_err <= 1e-9 and tail_err <= 1e-6
          and hand_ok and abs(closed_form - 0.0498) < 5e-4)
    assert _report(
        "criterion 6 (statistics oracle suite)",
        ok,
        f"partition rel err = {worst_partition:.2e}, closed-form err = {f_err:.2e}, "
        f"tail-vs-quadrature err = {tail_err:.2e}, hand ANOVA exact = {hand_ok}",
    )


def test_criterion_7_directional_consistency():
    config = PlatformConfig()
    master_seeds = list(range(301, 311))
    ok_count = 0
    details = []
    for master in master_seeds:
        acc = {True: [], False: []}
        delay = {True: [], False: []}
        for subject in range(10):
            for label in CONDITION_LABELS:
                seeds = derive_trial_seeds(master, subject,
                                           CONDITION_LABELS.index(label))
                condition = Condition.from_label(label)
                _, rep = run_simulated_trial(condition, seeds, config,
                                             subject=subject)
                acc[condition.u_access].append(rep.accuracy)
                delay[condition.u_access].append(rep.delay)
        directional = (
            np.mean(acc[True]) >= np.mean(acc[False])
            and np.mean(delay[True]) <= np.mean(delay[False])
        )
        ok_count += directional
        details.append(
            f"seed {master}: acc {np.mean(acc[True]):.3f}/{np.mean(acc[False]):.3f} "
            f"delay {np.mean(delay[True]):.3f}/{np.mean(delay[False]):.3f} "
            f"{'ok' if directional else 'X'}"
        )
    frac = ok_count / len(master_seeds)
    ok = frac >= 0.90
    assert _report(
        "criterion 7 (u-access improves accuracy and delay on >= 90% of seeds)",
        ok,
        f"directional on {ok_count}/{len(master_seeds)} master seeds\n  "
        + "\n  ".join(details),
    )


def test_criterion_8_round_trip_and_live_equivalence(tmp_path):
    # exact log round trip on a full-length trial
    cfg = PlatformConfig()
    seeds = derive_trial_seeds(55, 0, 1)
    log, _ = run_simulated_trial(Condition.from_label("uVisual"), seeds, cfg)
    path = tmp_path / "round.csv"
    write_log(log, path)
    round_trip_ok = read_log(path) == log

    # scripted live session: metrics in the end message equal the offline
    # pipeline run on the persisted log
    import json as json_mod

    from fastapi.testclient import TestClient

    from supertrack.service import create_app

    live_cfg = PlatformConfig(
        grid=SimGrid(sample_rate=100.0, duration=6.0),
        service=ServiceSettings(tick_rate=60.0, time_scale=30.0),
    )
    app = create_app(live_cfg, out_dir=tmp_path)
    with TestClient(app) as client:
        sid = client.post("/sessions", json={
            "condition": "uVisual", "operator_source": "model",
            "master_seed": 7, "subject": 0,
        }).json()["id"]
        with client.websocket_connect(f"/ws/{sid}") as ws:
            ws.send_text(json_mod.dumps({"type": "hello", "role": "supervisor"}))
            json_mod.loads(ws.receive_text())
            ws.send_text(json_mod.dumps({"type": "start"}))
            for t, key in ((0.5, 2), (1.7, 1), (3.0, 3), (4.4, 2)):
                ws.send_text(json_mod.dumps({"type": "key", "t": t, "key": key}))
            while True:
                msg = json_mod.loads(ws.receive_text())
                if msg["type"] == "end":
                    break
    live_log = read_log(msg["log_path"])
    offline_report = report_from_log(live_log)
    live_ok = (
        msg["metrics"]["accuracy"] == offline_report.accuracy
        and msg["metrics"]["delay"] == offline_report.delay
        and msg["metrics"]["operator_rms"] == offline_report.operator_rms
        and int(np.count_nonzero(live_log.columns["selection"])) > 0
    )
    ok = round_trip_ok and live_ok
    assert _report(
        "criterion 8 (exact log round trip, live/offline metric equivalence)",
        ok,
        f"round trip exact = {round_trip_ok}, live metrics equal = {live_ok}",
    )
