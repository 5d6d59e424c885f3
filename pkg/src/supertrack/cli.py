"""Command-line entry point.

Commands:
  reproduce-sim   closed-loop Monte Carlo: RMS of the two supervisor
                  estimates against the shown reference, plus overlay data
  simulate        one trial under a chosen condition, written as a log
  experiment      full subjects x conditions run with statistics
  analyze         metrics + statistics over a directory of logs
  serve           live-trial WebSocket service
  export-plots    CSV series for trace overlays from a log

The default config path comes from --config or $SUPERTRACK_CONFIG.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import metrics, signals, simcore, stats, trial as trial_mod
from .config import PlatformConfig, load_config, save_config
from .errors import ConfigError, LogParseError
from .trial import CONDITION_LABELS, Condition, derive_trial_seeds

CONFIG_ENV = "SUPERTRACK_CONFIG"
LISTEN_ENV = "SUPERTRACK_LISTEN"


def _load(args) -> PlatformConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    return load_config(path)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_reproduce_sim(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    grid = config.grid
    kp = simcore.derive_operator_gain(config.operator)
    rows = []
    for k in range(args.trials):
        seeds = derive_trial_seeds(args.seed, k, 0)
        ref_set = signals.make_reference_set(config.signals, seeds.reference_seed)
        trace = signals.build_switch_schedule(
            ref_set, config.switching, grid.duration, seeds.schedule_seed,
            scan_rate=grid.sample_rate,
        )
        series = simcore.simulate_closed_loop(ref_set, trace, config.operator, grid)
        r_hat = simcore.estimate_reference_with_u(series, kp).r_hat
        rows.append((
            k,
            metrics.rms_error(series.y, series.r_active),
            metrics.rms_error(r_hat, series.r_active),
        ))
        if k == 0:
            seg = slice(0, min(len(series.time), int(12 * grid.sample_rate)))
            overlay = np.column_stack([
                series.time[seg], series.r_active[seg], series.y[seg], r_hat[seg],
            ])
            header = "t,r,y,r_hat"
            np.savetxt(out / "overlay.csv", overlay, delimiter=",",
                       header=header, comments="")

    arr = np.array([(a, b) for _, a, b in rows])
    mean_y, mean_rhat = arr[:, 0].mean(), arr[:, 1].mean()
    ratio = mean_rhat / mean_y
    frac_better = float(np.mean(arr[:, 1] < arr[:, 0]))
    with open(out / "reproduce_sim.csv", "w") as fh:
        fh.write("trial,rms_y,rms_rhat\n")
        for k, a, b in rows:
            fh.write(f"{k},{a!r},{b!r}\n")
    print(f"trials:                 {args.trials}")
    print(f"mean RMS(y - r):        {mean_y:.6f}")
    print(f"mean RMS(r_hat - r):    {mean_rhat:.6f}")
    print(f"ratio r_hat/y:          {ratio:.4f}")
    print(f"fraction r_hat better:  {frac_better:.3f}")
    print(f"wrote {out / 'reproduce_sim.csv'} and {out / 'overlay.csv'}")
    return 0


def cmd_simulate(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    condition = Condition.from_label(args.condition)
    seeds = derive_trial_seeds(args.seed, args.subject,
                               CONDITION_LABELS.index(args.condition))
    log, report = trial_mod.run_simulated_trial(condition, seeds, config,
                                                subject=args.subject)
    path = out / f"trial_s{args.subject:02d}_{args.condition}.csv"
    trial_mod.write_log(log, path)
    delay = "n/a" if report.delay is None else f"{report.delay:.3f} s"
    print(f"accuracy {report.accuracy:.4f}  delay {delay}  "
          f"operator rms {report.operator_rms:.4f}")
    print(f"wrote {path}")
    return 0


def cmd_experiment(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    plan = trial_mod.make_experiment_plan(args.subjects, args.seed,
                                          duration=config.grid.duration)
    result = trial_mod.run_experiment(plan, config, jobs=args.jobs)
    log_dir = out / "logs"
    log_dir.mkdir(exist_ok=True)
    for log in result.logs:
        name = f"trial_s{log.metadata['subject']:02d}_{log.metadata['condition']}.csv"
        trial_mod.write_log(log, log_dir / name)
    (out / "summary.csv").write_text(result.summary_csv)
    (out / "report.txt").write_text(_format_report(result))
    print(_format_report(result))
    print(f"wrote {len(result.logs)} logs to {log_dir}, summary to {out}")
    return 0


def _format_report(result) -> str:
    lines = [result.summary_text]
    for name in ("accuracy", "delay"):
        outcome = result.anova.get(name)
        if isinstance(outcome, stats.AnovaResult):
            lines.append(
                f"{name}: F({outcome.df_effect}, {outcome.df_error}) = "
                f"{outcome.F:.3f}, p = {outcome.p:.4f}, "
                f"generalized eta^2 = {outcome.eta_g_squared:.4f}"
            )
            posthoc = result.posthoc[name]
            for pair in posthoc.pairs:
                if pair.error:
                    lines.append(f"  {pair.pair[0]} vs {pair.pair[1]}: {pair.error}")
                else:
                    lines.append(
                        f"  {pair.pair[0]} vs {pair.pair[1]}: t({pair.df}) = "
                        f"{pair.t:.3f}, adjusted p = {pair.p_adjusted:.4f}"
                    )
        else:
            lines.append(f"{name}: {outcome}")
    for flag in result.flags:
        lines.append(f"note: {flag}")
    return "\n".join(lines) + "\n"


def cmd_analyze(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    digest = config.digest()
    log_dir = Path(args.logs)
    paths = sorted(log_dir.glob("*.csv"))
    if not paths:
        print(f"no logs found in {log_dir}", file=sys.stderr)
        return 1
    by_cell: dict[tuple[int, str], trial_mod.TrialLog] = {}
    for p in paths:
        try:
            log = trial_mod.read_log(p, expected_digest=digest)
        except LogParseError as exc:
            print(f"skipping {p.name}: {exc}", file=sys.stderr)
            continue
        key = (int(log.metadata["subject"]), str(log.metadata["condition"]))
        by_cell[key] = log

    subjects = sorted({s for s, _ in by_cell})
    missing = [
        (s, c) for s in subjects for c in CONDITION_LABELS if (s, c) not in by_cell
    ]
    if missing:
        print("incomplete design; missing (subject, condition) cells:",
              file=sys.stderr)
        for cell in missing:
            print(f"  {cell}", file=sys.stderr)
        return 1

    reports = {key: trial_mod.report_from_log(log) for key, log in by_cell.items()}
    remap = {s: i for i, s in enumerate(subjects)}
    reports = {(remap[s], c): rep for (s, c), rep in reports.items()}
    plan = trial_mod.ExperimentPlan(
        subjects=len(subjects), master_seed=0,
        orders=tuple(CONDITION_LABELS for _ in subjects),
        duration=config.grid.duration,
    )
    result = trial_mod.analyze_reports(plan, reports)
    (out / "summary.csv").write_text(result.summary_csv)
    (out / "report.txt").write_text(_format_report(result))
    print(_format_report(result))
    if len(subjects) < 2:
        print("warning: fewer than 2 subjects; statistics are degenerate",
              file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _load(args)
    listen = args.listen or os.environ.get(LISTEN_ENV, "127.0.0.1:8000")
    host, _, port = listen.rpartition(":")
    ui_dir = args.ui or _default_ui_dir()
    app = create_app(config, out_dir=args.out, ui_dir=ui_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def _default_ui_dir() -> str | None:
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return str(candidate) if candidate.exists() else None


def cmd_export_plots(args) -> int:
    out = _out_dir(args)
    log = trial_mod.read_log(args.log)
    t = log.columns["t"]
    lo = np.searchsorted(t, args.start)
    hi = np.searchsorted(t, args.start + args.span)
    seg = slice(lo, hi)
    overlay = np.column_stack([
        t[seg], log.columns["r1"][seg], log.columns["r2"][seg],
        log.columns["r3"][seg], log.columns["y"][seg],
        log.columns["active_index"][seg], log.columns["selection"][seg],
    ])
    np.savetxt(out / "traces.csv", overlay, delimiter=",",
               header="t,r1,r2,r3,y,active_index,selection", comments="")
    print(f"wrote {out / 'traces.csv'} ({hi - lo} samples)")
    return 0


def cmd_init_config(args) -> int:
    save_config(PlatformConfig(), args.path)
    print(f"wrote default config to {args.path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supertrack",
        description="supervisory tracking platform",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--config", help=f"config file (default ${CONFIG_ENV})")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--seed", type=int, default=1, help="master seed")

    p = sub.add_parser("reproduce-sim",
                       help="closed-loop estimate comparison over many trials")
    common(p, "out/reproduce")
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_reproduce_sim)

    p = sub.add_parser("simulate", help="run and persist one simulated trial")
    common(p, "out/simulate")
    p.add_argument("--condition", choices=CONDITION_LABELS, default="uVisual")
    p.add_argument("--subject", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="run a subjects x conditions experiment")
    common(p, "out/experiment")
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("analyze", help="metrics and statistics over stored logs")
    common(p, "out/analyze")
    p.add_argument("logs", help="directory of trial logs")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("serve", help="run the live-trial service")
    common(p, "sessions")
    p.add_argument("--listen", help=f"host:port (default ${LISTEN_ENV} or 127.0.0.1:8000)")
    p.add_argument("--ui", help="directory with the built browser client")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-plots", help="CSV overlay series from a log")
    common(p, "out/plots")
    p.add_argument("log", help="trial log path")
    p.add_argument("--start", type=float, default=0.0, help="segment start, s")
    p.add_argument("--span", type=float, default=12.0, help="segment length, s")
    p.set_defaults(func=cmd_export_plots)

    p = sub.add_parser("init-config", help="write the default config file")
    p.add_argument("path", help="where to write the config")
    p.set_defaults(func=cmd_init_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except LogParseError as exc:
        print(f"log error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
