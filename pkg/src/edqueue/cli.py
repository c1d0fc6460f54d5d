"""Command-line surface: simulate, analyze, fit.

Every command writes its outputs into ``--out DIR`` together with a
``manifest.txt`` (flat ``key = value`` lines) echoing the exact inputs, so
any run can be reproduced. Plot-ready data goes out as CSV; reports are
flat key-value text, stable for machine diffing.

Exit codes: 0 success, 2 usage/config error, 3 IO error, 4 empty data.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .fitting import (
    ALLOWED_ALPHAS,
    FitResult,
    LogNormalParams,
    ModelKind,
    compare,
    eval_lognormal,
    eval_powerlaw_cutoff,
    fit,
)
from .ingest import ingest_csv
from .simulation import (
    ConfigError,
    RejectionPolicy,
    SelectionPolicy,
    SimulationConfig,
    classify_regime,
    simulate,
)
from .stats import (
    Histogram,
    SampleSource,
    WaitingTimeSample,
    histogram,
    summary,
    waiting_times,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_EMPTY = 4

HISTOGRAM_CSV_HEADER = "bin_left,bin_right,count,density"


class Command(Enum):
    SIMULATE = "simulate"
    ANALYZE = "analyze"
    FIT = "fit"
    REPORT = "report"


class EmptyDataError(Exception):
    """No usable rows/values remain after validation."""


# --- config file handling -------------------------------------------------

_CONFIG_FIELDS = (
    "lambda_per_period",
    "capacity_per_meeting",
    "period_days",
    "queue_cap",
    "selection_policy",
    "rejection_policy",
    "horizon_periods",
    "warmup_periods",
    "seed",
)


def parse_config(text: str) -> SimulationConfig:
    """Parse the flat ``key = value`` config format ('#' starts a comment)."""
    raw: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _CONFIG_FIELDS:
            raise ConfigError(key, "unknown configuration key")
        if key in raw:
            raise ConfigError(key, "duplicate configuration key")
        raw[key] = value

    kwargs: dict = {}
    try:
        for key, value in raw.items():
            if key in ("lambda_per_period", "period_days"):
                kwargs[key] = float(value)
            elif key in ("capacity_per_meeting", "horizon_periods", "warmup_periods", "seed"):
                kwargs[key] = int(value)
            elif key == "queue_cap":
                kwargs[key] = None if value.lower() == "unbounded" else int(value)
            elif key == "selection_policy":
                kwargs[key] = SelectionPolicy(value.lower())
            elif key == "rejection_policy":
                kwargs[key] = RejectionPolicy(value.lower())
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse value {value!r}: {exc}") from None
    return SimulationConfig(**kwargs)


def format_config(config: SimulationConfig) -> str:
    """Inverse of parse_config; round-trips every field."""
    cap = "unbounded" if config.queue_cap is None else str(config.queue_cap)
    lines = [
        f"lambda_per_period = {config.lambda_per_period!r}",
        f"capacity_per_meeting = {config.capacity_per_meeting}",
        f"period_days = {config.period_days!r}",
        f"queue_cap = {cap}",
        f"selection_policy = {config.selection_policy.value}",
        f"rejection_policy = {config.rejection_policy.value}",
        f"horizon_periods = {config.horizon_periods}",
        f"warmup_periods = {config.warmup_periods}",
        f"seed = {config.seed}",
    ]
    return "\n".join(lines) + "\n"


def load_config(path: Path) -> SimulationConfig:
    return parse_config(path.read_text(encoding="utf-8"))


# --- file formats ---------------------------------------------------------

def write_kv(path: Path, items: Sequence[tuple[str, object]]):
    lines = [f"{key} = {_fmt(value)}" for key, value in items]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return "undefined"
    return str(value)


def write_sample_file(path: Path, values: np.ndarray):
    """One waiting time per line, full float precision."""
    lines = [repr(float(v)) for v in values]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_sample_file(path: Path) -> np.ndarray:
    values = [float(line) for line in path.read_text(encoding="utf-8").split() if line]
    return np.asarray(values, dtype=float)


def write_histogram_csv(path: Path, hist: Histogram):
    rows = [HISTOGRAM_CSV_HEADER]
    for left, right, count, density in zip(
        hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts, hist.densities
    ):
        rows.append(f"{float(left)!r},{float(right)!r},{int(count)},{float(density)!r}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_histogram_csv(path: Path) -> Histogram:
    """Rebuild a histogram from its CSV export.

    Densities are taken from the file as-is (fits run on what was
    exported); bins must be contiguous. Centers are treated as arithmetic:
    fitting operates on linear binnings.
    """
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines or lines[0].strip() != HISTOGRAM_CSV_HEADER:
        raise ValueError(f"{path}: expected header '{HISTOGRAM_CSV_HEADER}'")
    lefts, rights, counts, densities = [], [], [], []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}: malformed histogram row {line!r}")
        lefts.append(float(parts[0]))
        rights.append(float(parts[1]))
        counts.append(int(parts[2]))
        densities.append(float(parts[3]))
    if not lefts:
        raise EmptyDataError(f"{path}: histogram has no bins")
    edges = np.array(lefts + [rights[-1]], dtype=float)
    if not np.allclose(edges[1:-1], np.array(rights[:-1])):
        raise ValueError(f"{path}: bins are not contiguous")
    if np.any(np.diff(edges) <= 0):
        raise ValueError(f"{path}: bin edges are not increasing")
    return Histogram(
        bin_edges=edges,
        counts=np.array(counts, dtype=int),
        densities=np.array(densities, dtype=float),
        total_count=int(sum(counts)),
    )


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(
    out_dir: Path,
    command: Command,
    *,
    seed: Optional[int] = None,
    config: Optional[SimulationConfig] = None,
    extra: Sequence[tuple[str, object]] = (),
    outputs: Sequence[str] = (),
):
    items: list[tuple[str, object]] = [
        ("command", command.value),
        ("version", __version__),
        ("created_utc", _timestamp()),
    ]
    if seed is not None:
        items.append(("seed", seed))
    if config is not None:
        cap = "unbounded" if config.queue_cap is None else config.queue_cap
        items += [
            ("config.lambda_per_period", config.lambda_per_period),
            ("config.capacity_per_meeting", config.capacity_per_meeting),
            ("config.period_days", config.period_days),
            ("config.queue_cap", cap),
            ("config.selection_policy", config.selection_policy.value),
            ("config.rejection_policy", config.rejection_policy.value),
            ("config.horizon_periods", config.horizon_periods),
            ("config.warmup_periods", config.warmup_periods),
            ("config.seed", config.seed),
        ]
    items += list(extra)
    for name in outputs:
        items.append(("output", name))
    write_kv(out_dir / "manifest.txt", items)


# --- simulate -------------------------------------------------------------

def _replica_seed(base_seed: int, replica: int) -> int:
    """Derived, documented replica seed: child state of a numpy SeedSequence."""
    return int(np.random.SeedSequence([base_seed, replica]).generate_state(1)[0])


def cmd_simulate(config_path: Path, out_dir: Path, replicas: int = 1, bin_width: float = 10.0) -> int:
    config = load_config(config_path)
    if replicas < 1:
        raise ConfigError("replicas", "must be >= 1")
    out_dir.mkdir(parents=True, exist_ok=True)

    all_values: list[np.ndarray] = []
    per_replica: list[tuple[int, object]] = []
    totals = {"arrivals": 0, "accepted": 0, "rejected": 0, "in_queue": 0}
    for replica in range(replicas):
        seed = config.seed if replicas == 1 else _replica_seed(config.seed, replica)
        run_config = SimulationConfig(**{**_config_kwargs(config), "seed": seed})
        trace = simulate(run_config)
        sample = waiting_times(trace)
        all_values.append(sample.values)
        totals["arrivals"] += trace.total_arrivals
        totals["accepted"] += len(trace.accepted)
        totals["rejected"] += len(trace.rejected)
        totals["in_queue"] += len(trace.in_queue_at_end)
        per_replica.append((seed, trace))

    values = np.concatenate(all_values) if all_values else np.empty(0)
    write_sample_file(out_dir / "waiting_times.txt", values)
    outputs = ["waiting_times.txt", "trace_summary.txt", "config_used.cfg", "manifest.txt"]
    if values.size:
        hist = histogram(values, bin_width=bin_width)
        write_histogram_csv(out_dir / "histogram.csv", hist)
        outputs.insert(1, "histogram.csv")

    rho = config.traffic_intensity
    items: list[tuple[str, object]] = [
        ("replicas", replicas),
        ("traffic_intensity", rho),
        ("regime", classify_regime(rho).value),
        ("total_arrivals", totals["arrivals"]),
        ("accepted", totals["accepted"]),
        ("rejected", totals["rejected"]),
        ("in_queue_at_end", totals["in_queue"]),
        ("waiting_times_after_warmup", int(values.size)),
    ]
    if values.size:
        stats = summary(values)
        items += [
            ("waiting_time_mean_days", stats.mean),
            ("waiting_time_median_days", stats.median),
            ("waiting_time_max_days", stats.max),
        ]
    for idx, (seed, trace) in enumerate(per_replica):
        full = sum(
            1 for _, t in _per_meeting_acceptances(trace).items()
            if t == trace.config.capacity_per_meeting
        )
        items.append((f"replica.{idx}.seed", seed))
        items.append((f"replica.{idx}.arrivals", trace.total_arrivals))
        items.append((f"replica.{idx}.full_meetings_fraction", full / trace.config.horizon_periods))
    write_kv(out_dir / "trace_summary.txt", items)
    (out_dir / "config_used.cfg").write_text(format_config(config), encoding="utf-8")
    write_manifest(
        out_dir,
        Command.SIMULATE,
        seed=config.seed,
        config=config,
        extra=[("replicas", replicas), ("bin_width", bin_width)],
        outputs=outputs,
    )
    print(f"simulate: wrote {len(outputs)} files to {out_dir}")
    return EXIT_OK


def _config_kwargs(config: SimulationConfig) -> dict:
    kwargs = asdict(config)
    kwargs["selection_policy"] = config.selection_policy
    kwargs["rejection_policy"] = config.rejection_policy
    return kwargs


def _per_meeting_acceptances(trace) -> dict[int, int]:
    counts: dict[int, int] = {}
    for entry in trace.accepted:
        counts[entry.meeting_index] = counts.get(entry.meeting_index, 0) + 1
    return counts


# --- analyze --------------------------------------------------------------

def cmd_analyze(records_path: Path, out_dir: Path, bin_width: float = 10.0) -> int:
    report = ingest_csv(records_path)
    if not report.admitted:
        raise EmptyDataError(f"{records_path}: no admitted records after validation")
    out_dir.mkdir(parents=True, exist_ok=True)

    t_w = report.waiting_times()
    sample = WaitingTimeSample(np.asarray(t_w, dtype=float), SampleSource.EMPIRICAL)
    hist = histogram(sample, bin_width=bin_width)
    stats = summary(sample)

    items: list[tuple[str, object]] = [
        ("input_rows", report.total_rows),
        ("admitted", len(report.admitted)),
        ("excluded", len(report.excluded)),
    ]
    for reason, count in report.exclusion_counts().items():
        items.append((f"excluded.{reason.value}", count))
    items += [
        ("record_count", stats.count),
        ("max_waiting_time_days", int(max(t_w))),
        ("mean_waiting_time_days", stats.mean),
        ("median_waiting_time_days", stats.median),
    ]
    write_kv(out_dir / "ingest_report.txt", items)
    write_histogram_csv(out_dir / "histogram.csv", hist)
    write_sample_file(out_dir / "waiting_times.txt", sample.values)
    outputs = ["ingest_report.txt", "histogram.csv", "waiting_times.txt", "manifest.txt"]
    write_manifest(
        out_dir,
        Command.ANALYZE,
        extra=[("input", str(records_path)), ("bin_width", bin_width)],
        outputs=outputs,
    )
    print(
        f"analyze: {len(report.admitted)} admitted, {len(report.excluded)} excluded; "
        f"wrote {len(outputs)} files to {out_dir}"
    )
    return EXIT_OK


# --- fit ------------------------------------------------------------------

def _load_fit_input(input_path: Path, bin_width: float) -> tuple[Histogram, bool]:
    """Detect input kind: histogram CSV (by header) or raw sample file."""
    with open(input_path, "r", encoding="utf-8") as handle:
        first = handle.readline().strip()
    if first == HISTOGRAM_CSV_HEADER:
        return read_histogram_csv(input_path), False
    values = read_sample_file(input_path)
    if values.size == 0:
        raise EmptyDataError(f"{input_path}: no sample values")
    return histogram(values, bin_width=bin_width), True


def _fit_report_items(result: FitResult) -> list[tuple[str, object]]:
    items: list[tuple[str, object]] = [("model", result.model.value)]
    params = result.params
    if isinstance(params, LogNormalParams):
        items += [
            ("p0", params.p0),
            ("amplitude", params.amplitude),
            ("t_c", params.t_c),
            ("varpi", params.varpi),
        ]
    else:
        items += [
            ("amplitude", params.amplitude),
            ("alpha", params.alpha),
            ("t0", params.t0),
        ]
    items += [
        ("sse", result.sse),
        ("r_squared", result.r_squared),
        ("n_bins", result.n_bins),
        ("converged", result.converged),
        ("iterations", result.iterations),
    ]
    return items


def _write_curve_csv(path: Path, result: FitResult):
    hist = result.histogram
    centers = hist.bin_centers()
    if isinstance(result.params, LogNormalParams):
        values = eval_lognormal(result.params, centers)
    else:
        values = eval_powerlaw_cutoff(result.params, centers)
    rows = ["t,density"] + [f"{float(t)!r},{float(d)!r}" for t, d in zip(centers, values)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def cmd_fit(
    input_path: Path,
    out_dir: Path,
    model: Optional[str] = None,
    alpha: Optional[float] = None,
    fit_all: bool = False,
    bin_width: float = 10.0,
) -> int:
    hist, from_sample = _load_fit_input(input_path, bin_width)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs: list[tuple[ModelKind, Optional[float]]] = []
    if fit_all:
        jobs = [(ModelKind.LOGNORMAL, None), (ModelKind.POWERLAW_CUTOFF, alpha or 1.0)]
    else:
        if model is None:
            raise ConfigError("model", "required unless --all is given")
        kind = ModelKind(model)
        if kind is ModelKind.POWERLAW_CUTOFF and alpha is None:
            raise ConfigError("alpha", "required for the plcutoff model (1 or 1.5)")
        jobs = [(kind, alpha)]

    outputs = ["manifest.txt"]
    if from_sample:
        write_histogram_csv(out_dir / "histogram.csv", hist)
        outputs.append("histogram.csv")

    results: list[FitResult] = []
    for kind, a in jobs:
        result = fit(hist, kind, alpha_fixed=a)
        results.append(result)
        report_name = f"fit_report_{kind.value}.txt"
        curve_name = f"curve_{kind.value}.csv"
        write_kv(out_dir / report_name, _fit_report_items(result))
        _write_curve_csv(out_dir / curve_name, result)
        outputs += [report_name, curve_name]
        flag = "converged" if result.converged else "did not converge"
        print(f"fit {kind.value}: sse={result.sse:.6g} r2={result.r_squared} ({flag})")

    if fit_all:
        report = compare(results[0], results[1])
        items: list[tuple[str, object]] = []
        for result in results:
            prefix = result.model.value
            for key, value in _fit_report_items(result):
                if key != "model":
                    items.append((f"{prefix}.{key}", value))
        items += [
            ("preferred", report.preferred.value if report.preferred else "tie"),
            ("rel_sse_difference", report.rel_sse_difference),
            ("indistinguishable", report.indistinguishable),
        ]
        write_kv(out_dir / "comparison_report.txt", items)
        outputs.append("comparison_report.txt")

    write_manifest(
        out_dir,
        Command.FIT,
        extra=[
            ("input", str(input_path)),
            ("model", "all" if fit_all else jobs[0][0].value),
            ("alpha", jobs[-1][1] if jobs[-1][0] is ModelKind.POWERLAW_CUTOFF else None),
            ("bin_width", bin_width),
        ],
        outputs=outputs,
    )
    print(f"fit: wrote {len(outputs)} files to {out_dir}")
    return EXIT_OK


# --- argument parsing -----------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edqueue",
        description="Editorial-queue simulator and waiting-time analysis",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the queue model from a config file")
    p_sim.add_argument("--config", type=Path, required=True, help="flat key=value config file")
    p_sim.add_argument("--out", type=Path, required=True, help="output directory")
    p_sim.add_argument("--replicas", type=int, default=1, help="independent runs with derived seeds")
    p_sim.add_argument("--bin-width", type=float, default=10.0, help="histogram bin width in days")

    p_ana = sub.add_parser("analyze", help="ingest a submissions CSV and build the histogram")
    p_ana.add_argument("--records", type=Path, required=True, help="CSV with id,submitted,accepted")
    p_ana.add_argument("--out", type=Path, required=True)
    p_ana.add_argument("--bin-width", type=float, default=10.0)

    p_fit = sub.add_parser("fit", help="fit distribution models to a histogram or sample")
    p_fit.add_argument("--input", type=Path, required=True, help="histogram CSV or one-value-per-line sample")
    p_fit.add_argument("--out", type=Path, required=True)
    p_fit.add_argument("--model", choices=[m.value for m in ModelKind])
    p_fit.add_argument("--alpha", type=float, choices=list(ALLOWED_ALPHAS))
    p_fit.add_argument("--all", action="store_true", dest="fit_all", help="fit both models and compare")
    p_fit.add_argument("--bin-width", type=float, default=10.0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out, args.replicas, args.bin_width)
        if args.command == "analyze":
            return cmd_analyze(args.records, args.out, args.bin_width)
        return cmd_fit(args.input, args.out, args.model, args.alpha, args.fit_all, args.bin_width)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmptyDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
