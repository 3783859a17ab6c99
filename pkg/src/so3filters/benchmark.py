"""Monte-Carlo benchmark runner, result files and command-line front end.

Runs N independently seeded repetitions of a scenario through any subset
of {hinf, mekf, game, triad}, logging the geodesic attitude error in
degrees at every grid time, then pools squared errors across runs and
time into a transient window [0, 10) s and a steady-state window
[10, duration] s.

File contract (all under the output directory):
  - ``records.csv``: header ``run,filter,t,error_deg``, one row per step.
  - ``summary.json``: per-filter transient/steady RMS, run counts, the
    scenario echo and the package version string.
  - ``curves.csv``: header ``filter,t,mean_abs_error_deg``, the per-filter
    mean absolute error over runs at each grid time (the convergence-plot
    data).

Runs are seeded ``scenario.seed + run_index``, records are sorted before
emission, and floats are written with ``repr``, so identical inputs give
byte-identical files regardless of how the runs were scheduled.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .filters import (
    DegenerateDirections,
    FilterDiverged,
    FilterParams,
    FilterState,
    UnitQuaternion,
    game_step,
    hinf_step,
    mekf_step,
    triad_estimate,
)
from .sim import (
    Scenario,
    UnknownScenario,
    builtin_scenario,
    load_scenario,
    propagate_truth,
    synthesize_measurements,
)
from .so3 import geodesic_angle

__all__ = [
    "FILTER_NAMES",
    "RunRecord",
    "SummaryRow",
    "default_params",
    "run_single",
    "run_benchmark",
    "summarize",
    "emit_results",
    "read_records",
    "cli_main",
]

FILTER_NAMES = ("hinf", "mekf", "game", "triad")
TRANSIENT_WINDOW = 10.0  # s, transient/steady split of the RMS statistics

_STEP_FNS = {"hinf": hinf_step, "mekf": mekf_step, "game": game_step}


@dataclass
class RunRecord:
    """Per-step error log of one (run, filter) pair.

    ``t`` and ``error_deg`` are aligned arrays on the scenario grid;
    ``p_trace`` optionally holds the gain diagonal at each step.
    """

    run_id: int
    filter_name: str
    t: np.ndarray
    error_deg: np.ndarray
    p_trace: Optional[np.ndarray] = None
    diverged: bool = False


@dataclass
class SummaryRow:
    """Pooled RMS attitude errors of one filter over the benchmark."""

    filter_name: str
    transient_rms_deg: float
    steady_rms_deg: float
    n_runs: int = 0
    n_diverged: int = 0


def default_params(scenario: Scenario, gamma: float) -> FilterParams:
    """Tune the filters with the scenario's true noise levels."""
    return FilterParams(
        g=scenario.sigma_process,
        k_list=(scenario.sigma_meas,) * len(scenario.r_list),
        gamma=gamma,
        r_list=scenario.r_list,
    )


def _initial_state(filter_name: str) -> FilterState:
    # no prior attitude knowledge: identity estimate, large gain P0 = I/2
    P0 = 0.5 * np.eye(3)
    if filter_name == "mekf":
        return FilterState(P=P0, t=0.0, q_hat=UnitQuaternion.identity())
    return FilterState(P=P0, t=0.0, R_hat=np.eye(3))


def run_single(
    scenario: Scenario,
    filter_name: str,
    params: FilterParams,
    run_id: int = 0,
    p_integrator: str = "euler",
    log_gain: bool = False,
) -> RunRecord:
    """One seeded run of one filter; see :func:`run_benchmark` for pooling.

    The error at grid time t_k is logged before the frame at t_k is
    consumed, so the first entry shows the initial attitude error.  The
    memoryless TRIAD baseline instead solves each frame directly.  On
    divergence the partial record is attached to the raised
    :class:`FilterDiverged`.
    """
    truth = propagate_truth(scenario)
    frames = synthesize_measurements(truth, scenario)
    return _run_on_frames(
        frames, scenario.dt, filter_name, params, run_id, p_integrator, log_gain
    )


def _run_on_frames(
    frames, dt, filter_name, params, run_id, p_integrator, log_gain
) -> RunRecord:
    n = len(frames)
    t = np.empty(n)
    err = np.empty(n)
    p_trace = np.empty((n, 3)) if log_gain else None
    rad2deg = 180.0 / math.pi

    if filter_name == "triad":
        if len(params.r_list) < 2:
            raise ValueError("triad needs at least two reference directions")
        r1, r2 = params.r_list[0], params.r_list[1]
        for k, frame in enumerate(frames):
            t[k] = frame.t
            R_hat = triad_estimate(frame.y_list[0], frame.y_list[1], r1, r2)
            err[k] = geodesic_angle(frame.R_true, R_hat) * rad2deg
        return RunRecord(run_id, filter_name, t, err, None)

    if filter_name not in _STEP_FNS:
        raise ValueError(f"unknown filter {filter_name!r}; choose from {FILTER_NAMES}")
    step = _STEP_FNS[filter_name]
    state = _initial_state(filter_name)
    for k, frame in enumerate(frames):
        t[k] = frame.t
        err[k] = geodesic_angle(frame.R_true, state.attitude()) * rad2deg
        if log_gain:
            p_trace[k] = np.diagonal(state.P)
        try:
            state = step(state, frame, params, dt, p_integrator)
        except FilterDiverged as e:
            e.record = RunRecord(
                run_id,
                filter_name,
                t[: k + 1].copy(),
                err[: k + 1].copy(),
                p_trace[: k + 1].copy() if log_gain else None,
                diverged=True,
            )
            raise
    return RunRecord(run_id, filter_name, t, err, p_trace)


def summarize(records, duration: float) -> list:
    """Pool squared errors across runs and time into per-filter RMS rows.

    Transient covers t in [0, 10) s, steady state t in [10, duration] s;
    squared errors are pooled over all contributing (run, step) samples
    before taking the root, so the result is invariant to record order.
    Diverged records are counted but excluded from the statistics.
    """
    order = []
    acc = {}
    for rec in records:
        if rec.filter_name not in acc:
            order.append(rec.filter_name)
            acc[rec.filter_name] = [0.0, 0, 0.0, 0, 0, 0]  # ssq_t, n_t, ssq_s, n_s, runs, div
        a = acc[rec.filter_name]
        if rec.diverged:
            a[5] += 1
            continue
        sq = rec.error_deg * rec.error_deg
        mask = rec.t < TRANSIENT_WINDOW
        a[0] += float(np.sum(sq[mask]))
        a[1] += int(np.count_nonzero(mask))
        a[2] += float(np.sum(sq[~mask]))
        a[3] += int(np.count_nonzero(~mask))
        a[4] += 1
    rows = []
    for name in order:
        ssq_t, n_t, ssq_s, n_s, n_runs, n_div = acc[name]
        rows.append(
            SummaryRow(
                filter_name=name,
                transient_rms_deg=math.sqrt(ssq_t / n_t) if n_t else 0.0,
                steady_rms_deg=math.sqrt(ssq_s / n_s) if n_s else 0.0,
                n_runs=n_runs,
                n_diverged=n_div,
            )
        )
    return rows


def run_benchmark(
    scenario: Scenario,
    filter_set,
    n_runs: int,
    gamma: float,
    p_integrator: str = "euler",
    on_divergence: str = "raise",
    log_gain: bool = False,
):
    """Monte-Carlo benchmark: ``n_runs`` seeded runs of each filter.

    Run r uses seed ``scenario.seed + r`` for both truth corruption and
    measurement noise; every filter in ``filter_set`` consumes the same
    streams.  Returns ``(records, summaries)``.

    Divergence handling: with ``on_divergence="raise"`` (default) a
    :class:`FilterDiverged` escapes, re-raised with the run and filter
    identified; with ``"flag"`` the truncated record is kept, marked
    ``diverged``, and excluded from the summary statistics.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    if on_divergence not in ("raise", "flag"):
        raise ValueError(f"on_divergence must be 'raise' or 'flag', got {on_divergence!r}")
    filter_set = tuple(filter_set)
    for name in filter_set:
        if name not in FILTER_NAMES:
            raise ValueError(f"unknown filter {name!r}; choose from {FILTER_NAMES}")
    params = default_params(scenario, gamma)
    records = []
    for r in range(n_runs):
        sc = replace(scenario, seed=scenario.seed + r)
        truth = propagate_truth(sc)
        frames = synthesize_measurements(truth, sc)
        for name in filter_set:
            try:
                rec = _run_on_frames(
                    frames, sc.dt, name, params, r, p_integrator, log_gain
                )
            except FilterDiverged as e:
                if on_divergence == "raise":
                    raise FilterDiverged(
                        f"run {r}, filter {name}: {e}", t=e.t
                    ) from e
                rec = e.record
            records.append(rec)
    return records, summarize(records, scenario.duration)


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_results(records, summaries, out_path, scenario=None, gamma=None) -> dict:
    """Write records.csv, summary.json and curves.csv under ``out_path``.

    Records are sorted by (run, filter, t) first, so the files are
    byte-identical for identical inputs.  Returns the paths written.
    """
    out = Path(out_path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        records = sorted(records, key=lambda r: (r.run_id, r.filter_name))

        csv_path = out / "records.csv"
        lines = ["run,filter,t,error_deg"]
        for rec in records:
            name = rec.filter_name
            rid = rec.run_id
            for tk, ek in zip(rec.t.tolist(), rec.error_deg.tolist()):
                lines.append(f"{rid},{name},{_fmt(tk)},{_fmt(ek)}")
        csv_path.write_text("\n".join(lines) + "\n")

        summary_path = out / "summary.json"
        payload = {
            "version": f"so3filters-{__version__}",
            "gamma": gamma,
            "filters": {
                row.filter_name: {
                    "transient_rms_deg": row.transient_rms_deg,
                    "steady_rms_deg": row.steady_rms_deg,
                    "n_runs": row.n_runs,
                    "n_diverged": row.n_diverged,
                }
                for row in summaries
            },
        }
        if scenario is not None:
            payload["scenario"] = {
                "duration": scenario.duration,
                "dt": scenario.dt,
                "sigma_process": scenario.sigma_process,
                "sigma_meas": scenario.sigma_meas,
                "r_list": [list(map(float, r)) for r in scenario.r_list],
                "euler0": list(scenario.euler0),
                "profile": scenario.omega_profile,
                "seed": scenario.seed,
            }
        summary_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

        curves_path = out / "curves.csv"
        lines = ["filter,t,mean_abs_error_deg"]
        by_filter = {}
        for rec in records:
            if not rec.diverged:
                by_filter.setdefault(rec.filter_name, []).append(rec)
        for name in sorted(by_filter):
            recs = by_filter[name]
            t = recs[0].t
            mean_err = np.mean([np.abs(r.error_deg) for r in recs], axis=0)
            for tk, ek in zip(t.tolist(), mean_err.tolist()):
                lines.append(f"{name},{_fmt(tk)},{_fmt(ek)}")
        curves_path.write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise OSError(f"failed writing results under {out}: {e}") from e
    return {"records": csv_path, "summary": summary_path, "curves": curves_path}


def read_records(path) -> list:
    """Parse a records.csv back into per-(run, filter) records."""
    grouped = {}
    order = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "run,filter,t,error_deg":
            raise ValueError(f"unexpected records header {header!r} in {path}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rid, name, tk, ek = line.split(",")
            key = (int(rid), name)
            if key not in grouped:
                grouped[key] = ([], [])
                order.append(key)
            grouped[key][0].append(float(tk))
            grouped[key][1].append(float(ek))
    return [
        RunRecord(rid, name, np.array(grouped[(rid, name)][0]),
                  np.array(grouped[(rid, name)][1]))
        for rid, name in order
    ]


def _print_summary(summaries, file=sys.stdout) -> None:
    print(f"{'filter':<8} {'transient RMS (deg)':>20} {'steady RMS (deg)':>18}", file=file)
    for row in summaries:
        note = f"  ({row.n_diverged} diverged)" if row.n_diverged else ""
        print(
            f"{row.filter_name:<8} {row.transient_rms_deg:>20.2f} "
            f"{row.steady_rms_deg:>18.2f}{note}",
            file=file,
        )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="so3filters-bench",
        description="Monte-Carlo attitude-filter benchmark on SO(3).",
    )
    parser.add_argument(
        "--scenario",
        default="caseA",
        help="caseA, caseB, or a path to a scenario config file",
    )
    parser.add_argument(
        "--filters",
        default="hinf,mekf,game,triad",
        help="comma list from {hinf,mekf,game,triad}",
    )
    parser.add_argument("--runs", type=int, default=50, help="Monte-Carlo repetitions")
    parser.add_argument("--gamma", type=float, default=0.9, help="L2-gain bound")
    parser.add_argument("--dt", type=float, default=None, help="override time step, s")
    parser.add_argument(
        "--duration", type=float, default=None, help="override duration, s"
    )
    parser.add_argument("--seed", type=int, default=None, help="override base seed")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument(
        "--p-integrator",
        choices=("euler", "rk4"),
        default="euler",
        help="gain integration scheme",
    )
    return parser


def cli_main(argv=None) -> int:
    """Command-line entry point; exit 0 on success, 1 on usage error,
    2 when a filter diverges."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1

    try:
        if args.scenario in ("caseA", "caseB"):
            scenario = builtin_scenario(args.scenario)
        else:
            scenario = load_scenario(args.scenario)
        overrides = {}
        if args.dt is not None:
            overrides["dt"] = args.dt
        if args.duration is not None:
            overrides["duration"] = args.duration
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            scenario = replace(scenario, **overrides)
        filter_set = tuple(s.strip() for s in args.filters.split(",") if s.strip())
        if not filter_set:
            raise ValueError("no filters requested")
        for name in filter_set:
            if name not in FILTER_NAMES:
                raise ValueError(
                    f"unknown filter {name!r}; choose from {','.join(FILTER_NAMES)}"
                )
        if args.runs < 1:
            raise ValueError("--runs must be at least 1")
    except (ValueError, UnknownScenario, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1

    try:
        records, summaries = run_benchmark(
            scenario,
            filter_set,
            n_runs=args.runs,
            gamma=args.gamma,
            p_integrator=args.p_integrator,
        )
    except FilterDiverged as e:
        print(f"filter diverged: {e}", file=sys.stderr)
        return 2
    except DegenerateDirections as e:
        print(f"degenerate measurement geometry: {e}", file=sys.stderr)
        return 2

    paths = emit_results(records, summaries, args.out, scenario, args.gamma)
    _print_summary(summaries)
    print(f"wrote {paths['records']}, {paths['summary']}, {paths['curves']}")
    return 0


if __name__ == "__main__":
    sys.exit(cli_main())
