"""Command-line pipeline: predict, cluster, deploy, and compare.

Every subcommand is deterministic for fixed inputs and seed and writes
fixed filenames under ``--out``.  Exit codes: 0 success, 1 domain or
validation failure, 2 missing/unreadable input.  Set ``SKYPLAN_LOG`` to
``debug``/``info``/``warning`` for stderr diagnostics.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import access, clustering, data, placement, predictor
from .access import Scheme, UserDemand
from .channel import RadioParams
from .errors import InputError, SkyplanError, ValidationError

log = logging.getLogger("skyplan.cli")

RATE_PERIOD_SECONDS = 3600.0   # one traffic matrix cell covers one hour

PREDICTIONS_FILE = "predictions.csv"
GAP_REPORT_FILE = "gap_report.txt"
LABELS_FILE = "labels.csv"
MODEL_FILE = "keg_model.txt"
LOGLIK_FILE = "loglik_trace.csv"
PLAN_FILE = "plan.txt"
PLAN_SUMMARY_FILE = "plan_summary.csv"
ACCESS_CSV = "access_compare.csv"
ACCESS_SVG = "access_compare.svg"
SCHEMES_CSV = "scheme_compare.csv"
SCHEMES_SVG = "scheme_compare.svg"
TOPOLOGY_FILE = "topology.csv"
TRAFFIC_FILE = "traffic.csv"

_SERIES_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# Scenario loading shared by subcommands
# ---------------------------------------------------------------------------

def _radio_params(args) -> RadioParams:
    if getattr(args, "radio", None):
        return RadioParams.from_file(args.radio)
    return RadioParams()


def _load_stations(args) -> list[data.BaseStation]:
    stations = data.load_topology(args.topology)
    if getattr(args, "bounds", None):
        bounds = data.Bounds.from_string(args.bounds)
        stations = data.filter_area(stations, bounds)
        log.info("bounds filter kept %d stations", len(stations))
    if not stations:
        raise ValidationError("no stations left after loading/filtering topology")
    return stations


def _load_aligned_traffic(args, stations) -> data.TrafficMatrix:
    ids = [s.id for s in stations]
    return data.load_traffic(
        args.traffic,
        baseline=args.baseline,
        station_ids=ids,
        ignore_unknown=bool(getattr(args, "bounds", None)),
    )


def _train_config(args) -> predictor.TrainConfig:
    return predictor.TrainConfig(
        learning_rate=args.lr,
        max_epochs=args.epochs,
        error_threshold=args.error_threshold,
        rng_seed=args.seed,
        shuffle=args.shuffle,
        algorithm=args.algorithm,
    )


def _predict_matrix(traffic: data.TrafficMatrix, args) -> tuple[int, np.ndarray]:
    """Run the day-ahead predictor; returns (predicted day number, (N, 24) bytes)."""
    result = predictor.predict_next_day(
        traffic.values,
        _train_config(args),
        pooled=not args.per_station,
        early_stop=args.early_stop,
    )
    return traffic.n_days + 1, result.values


def _write_predictions(path, ids, day, values) -> None:
    lines = ["bs_id,day,hour,bytes"]
    for i, bs_id in enumerate(ids):
        for hour in range(values.shape[1]):
            lines.append(f"{bs_id},{day},{hour + 1},{_fmt(values[i, hour])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_predictions(path, ids) -> tuple[int, np.ndarray]:
    """Read a predictions CSV (single day) aligned to the given station ids."""
    matrix = data.load_traffic(path, baseline=0.0, station_ids=ids,
                               ignore_unknown=True)
    day = matrix.n_days
    values = matrix.values[:, day - 1, :]
    expected_gaps = (day - 1) * len(ids) * data.HOURS_PER_DAY
    if matrix.gap_count != expected_gaps:
        raise ValidationError(
            f"{path}: predictions must cover every station and hour of day {day}")
    return day, values


def _select_hour(values: np.ndarray, spec: str) -> int:
    """Hour choice: 1..24 or 'peak' (largest total, earliest on ties)."""
    if spec == "peak":
        return int(values.sum(axis=0).argmax()) + 1
    hour = int(spec)
    if not 1 <= hour <= data.HOURS_PER_DAY:
        raise ValidationError("--hour must be 1..24 or 'peak'")
    return hour


def _cluster_labels(stations, args) -> tuple[np.ndarray, clustering.KegResult]:
    """KEG on positions projected to meters.

    Meter coordinates keep the identity-covariance EM initialization
    much tighter than the station spread, so the K-means seeding is
    preserved instead of washed out in the first E step.
    """
    reference = data.mean_reference(stations)
    coords = data.project_to_meters(stations, reference)
    if args.k > len(stations):
        raise ValidationError(f"--k {args.k} exceeds the {len(stations)} stations")
    result = clustering.keg(coords, args.k, seed=args.seed)
    return result.labels, result


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Minimal deterministic SVG emission
# ---------------------------------------------------------------------------

def _svg_document(body: list[str], width: int = 520, height: int = 360) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _svg_line_plot(path, xs, series: dict[str, list[float]], title: str,
                   x_label: str, y_label: str) -> None:
    width, height = 520, 360
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom
    x_lo, x_hi = min(xs), max(xs)
    ys_all = [v for vals in series.values() for v in vals]
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return top + ph - (y - y_lo) / (y_hi - y_lo) * ph

    body = [
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">{x_label}</text>',
        f'<text x="16" y="{top + ph / 2:.1f}" font-size="12" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})" text-anchor="middle">{y_label}</text>',
    ]
    for i in range(5):
        frac = i / 4
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        body.append(f'<text x="{px(xv):.1f}" y="{top + ph + 16}" text-anchor="middle" '
                    f'font-size="10">{xv:.3g}</text>')
        body.append(f'<text x="{left - 6}" y="{py(yv) + 3:.1f}" text-anchor="end" '
                    f'font-size="10">{yv:.3g}</text>')
    for idx, (name, vals) in enumerate(series.items()):
        color = _SERIES_COLORS[idx % len(_SERIES_COLORS)]
        points = " ".join(f"{px(x):.2f},{py(v):.2f}" for x, v in zip(xs, vals))
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{points}"/>')
        ly = top + 14 + 16 * idx
        body.append(f'<line x1="{left + pw - 110}" y1="{ly}" x2="{left + pw - 86}" '
                    f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{left + pw - 80}" y="{ly + 4}" font-size="11">{name}</text>')
    Path(path).write_text(_svg_document(body), encoding="utf-8")


def _svg_bar_chart(path, labels: list[str], values: list[float], title: str,
                   y_label: str) -> None:
    width, height = 520, 360
    left, right, top, bottom = 70, 20, 40, 70
    pw, ph = width - left - right, height - top - bottom
    y_hi = max(values) if max(values) > 0 else 1.0
    n = len(values)
    slot = pw / n
    body = [
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="16" y="{top + ph / 2:.1f}" font-size="12" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})" text-anchor="middle">{y_label}</text>',
    ]
    for i in range(5):
        yv = y_hi * i / 4
        ypix = top + ph - ph * i / 4
        body.append(f'<text x="{left - 6}" y="{ypix + 3:.1f}" text-anchor="end" '
                    f'font-size="10">{yv:.3g}</text>')
    for i, (name, value) in enumerate(zip(labels, values)):
        bar_h = ph * value / y_hi
        x0 = left + slot * i + slot * 0.15
        body.append(f'<rect x="{x0:.2f}" y="{top + ph - bar_h:.2f}" '
                    f'width="{slot * 0.7:.2f}" height="{bar_h:.2f}" '
                    f'fill="{_SERIES_COLORS[i % len(_SERIES_COLORS)]}"/>')
        cx = left + slot * (i + 0.5)
        body.append(f'<text x="{cx:.1f}" y="{top + ph + 16}" text-anchor="middle" '
                    f'font-size="10" transform="rotate(18 {cx:.1f} {top + ph + 16})">{name}</text>')
        body.append(f'<text x="{cx:.1f}" y="{top + ph - bar_h - 4:.1f}" '
                    f'text-anchor="middle" font-size="10">{value:.3g}</text>')
    Path(path).write_text(_svg_document(body), encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_predict(args) -> int:
    out = _out_dir(args)
    stations = _load_stations(args)
    traffic = _load_aligned_traffic(args, stations)
    day, values = _predict_matrix(traffic, args)
    _write_predictions(out / PREDICTIONS_FILE, traffic.station_ids, day, values)
    if traffic.gap_count:
        data.write_gap_report(traffic, out / GAP_REPORT_FILE)
    print(f"predicted day {day} for {len(stations)} stations -> {out / PREDICTIONS_FILE}")
    if traffic.gap_count:
        print(f"{traffic.gap_count} missing cells filled with baseline "
              f"(see {out / GAP_REPORT_FILE})")
    return 0


def cmd_cluster(args) -> int:
    out = _out_dir(args)
    stations = _load_stations(args)
    labels, result = _cluster_labels(stations, args)

    lines = ["bs_id,cluster"]
    for s, label in zip(stations, labels):
        lines.append(f"{s.id},{label}")
    (out / LABELS_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")

    result.model.save(out / MODEL_FILE)
    reference = data.mean_reference(stations)
    with open(out / MODEL_FILE, "a", encoding="utf-8") as fh:
        fh.write(f"# feature space: meters about lon={reference[0]!r} "
                 f"lat={reference[1]!r}\n")
    trace_lines = ["iteration,log_likelihood"]
    for i, value in enumerate(result.log_likelihood_trace):
        trace_lines.append(f"{i},{_fmt(value)}")
    (out / LOGLIK_FILE).write_text("\n".join(trace_lines) + "\n", encoding="utf-8")

    print(f"clustered {len(stations)} stations into {result.model.k} cells "
          f"-> {out / LABELS_FILE}")
    return 0


def _load_or_compute_labels(args, stations) -> tuple[np.ndarray, int]:
    """Labels per station plus the cluster count they were built for."""
    if args.labels:
        try:
            text = Path(args.labels).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read labels file {args.labels}: {exc}") from exc
        mapping = {}
        lines = text.splitlines()
        if not lines or lines[0].strip() != "bs_id,cluster":
            raise ValidationError(f"{args.labels}: expected header 'bs_id,cluster'")
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                bs_id, label = (int(v) for v in line.split(","))
            except ValueError as exc:
                raise ValidationError(f"{args.labels}:{lineno}: malformed row") from exc
            mapping[bs_id] = label
        try:
            labels = np.array([mapping[s.id] for s in stations])
        except KeyError as exc:
            raise ValidationError(f"{args.labels}: no cluster for station {exc}") from None
        return labels, int(labels.max()) + 1
    labels, _ = _cluster_labels(stations, args)
    return labels, args.k


def _rates_for_deployment(args, stations, traffic) -> tuple[int, int, np.ndarray]:
    """(day, hour, per-station rate bit/s) from predictions or inline predictor."""
    if args.predictions:
        day, values = _load_predictions(args.predictions, [s.id for s in stations])
    else:
        day, values = _predict_matrix(traffic, args)
    hour = _select_hour(values, args.hour)
    return day, hour, values[:, hour - 1] / RATE_PERIOD_SECONDS


def cmd_deploy(args) -> int:
    out = _out_dir(args)
    params = _radio_params(args)
    stations = _load_stations(args)
    traffic = _load_aligned_traffic(args, stations)
    labels, expected_k = _load_or_compute_labels(args, stations)
    day, hour, rates = _rates_for_deployment(args, stations, traffic)

    reference = data.mean_reference(stations)
    xy = data.project_to_meters(stations, reference)
    ids = [s.id for s in stations]

    schemes = [Scheme(args.scheme)]
    if args.all_schemes:
        schemes = [Scheme.RSMA, Scheme.FDMA, Scheme.TDMA]

    plans = {
        scheme: placement.plan_deployment(
            labels, xy, rates, params, scheme=scheme,
            optimize_positions=not args.fixed_positions,
            station_ids=ids, expected_clusters=expected_k,
        )
        for scheme in schemes
    }
    primary = plans[Scheme(args.scheme)] if Scheme(args.scheme) in plans \
        else plans[schemes[0]]
    placement.write_plan(primary, out / PLAN_FILE)

    rows = ["scheme,uav_count,total_power_watts"]
    for scheme in schemes:
        plan = plans[scheme]
        rows.append(f"{scheme.value},{len(plan.cells)},{_fmt(plan.total_power)}")
    (out / PLAN_SUMMARY_FILE).write_text("\n".join(rows) + "\n", encoding="utf-8")

    print(f"deployed {len(primary.cells)} UAVs for day {day} hour {hour} "
          f"({primary.scheme.value}): {primary.total_power:.6g} W -> {out / PLAN_FILE}")
    if traffic.gap_count:
        data.write_gap_report(traffic, out / GAP_REPORT_FILE)
    return 0


def _parse_bandwidth_grid(spec: str) -> list[float]:
    try:
        lo_s, hi_s, steps_s = spec.split(":")
        lo, hi, steps = float(lo_s), float(hi_s), int(steps_s)
    except ValueError as exc:
        raise ValidationError(f"--bandwidth-grid must be lo:hi:steps, got {spec!r}") from exc
    if lo <= 0 or hi < lo or steps < 1:
        raise ValidationError("--bandwidth-grid needs 0 < lo <= hi and steps >= 1")
    if steps == 1:
        return [lo]
    return [lo + (hi - lo) * i / (steps - 1) for i in range(steps)]


def cmd_compare_access(args) -> int:
    out = _out_dir(args)
    params = _radio_params(args)
    stations = _load_stations(args)
    traffic = _load_aligned_traffic(args, stations)
    labels, _ = _load_or_compute_labels(args, stations)

    day = args.day if args.day else traffic.n_days
    if not 1 <= day <= traffic.n_days:
        raise ValidationError(f"--day must be 1..{traffic.n_days}")
    day_values = traffic.values[:, day - 1, :]
    hour = _select_hour(day_values, args.hour)
    rates = day_values[:, hour - 1] / RATE_PERIOD_SECONDS

    reference = data.mean_reference(stations)
    xy = data.project_to_meters(stations, reference)
    base_plan = placement.plan_deployment(labels, xy, rates, params,
                                          scheme=Scheme.RSMA,
                                          station_ids=[s.id for s in stations])
    demands = [
        placement.station_demands(cell, uav, params)
        for cell, uav in zip(base_plan.cells, base_plan.uav_positions)
    ]

    grid = _parse_bandwidth_grid(args.bandwidth_grid)
    totals = {scheme: [] for scheme in Scheme}
    for bandwidth in grid:
        for scheme in Scheme:
            total = math.fsum(
                access.solve(scheme, cell_users, bandwidth, params.noise_density).total_power
                for cell_users in demands
            )
            totals[scheme].append(total)

    for scheme in Scheme:
        series = totals[scheme]
        for i in range(1, len(series)):
            if series[i] > series[i - 1] * (1.0 + 1e-9):
                raise ValidationError(
                    f"{scheme.value} total power increased at W={grid[i]!r} "
                    f"({series[i - 1]!r} -> {series[i]!r})")

    rows = ["bandwidth_hz,rsma_w,fdma_w,tdma_w"]
    for i, bandwidth in enumerate(grid):
        rows.append(f"{_fmt(bandwidth)},{_fmt(totals[Scheme.RSMA][i])},"
                    f"{_fmt(totals[Scheme.FDMA][i])},{_fmt(totals[Scheme.TDMA][i])}")
    def mean_saving(other: Scheme) -> float:
        pcts = [
            100.0 * (o - r) / o
            for r, o in zip(totals[Scheme.RSMA], totals[other]) if o > 0
        ]
        return math.fsum(pcts) / len(pcts) if pcts else 0.0

    pct_fdma = mean_saving(Scheme.FDMA)
    pct_tdma = mean_saving(Scheme.TDMA)
    rows.append(f"rsma_savings_pct,0.0,{_fmt(pct_fdma)},{_fmt(pct_tdma)}")
    (out / ACCESS_CSV).write_text("\n".join(rows) + "\n", encoding="utf-8")

    _svg_line_plot(out / ACCESS_SVG, grid,
                   {s.value: totals[s] for s in Scheme},
                   "Total transmit power vs bandwidth",
                   "bandwidth (Hz)", "total power (W)")
    print(f"compared access schemes over {len(grid)} bandwidths "
          f"(day {day}, hour {hour}) -> {out / ACCESS_CSV}")
    print(f"rsma saves {pct_fdma:.1f}% vs fdma, {pct_tdma:.1f}% vs tdma "
          f"(mean over the grid)")
    return 0


def _grid_partition(xy: np.ndarray, k: int) -> np.ndarray:
    """Uniform rectangular partition of the bounding box into k cells.

    k is factored into the rows-by-columns pair closest to square, with
    the longer box axis taking the larger factor.
    """
    best = (1, k)
    for rows in range(1, k + 1):
        if k % rows == 0:
            cols = k // rows
            if abs(rows - cols) < abs(best[0] - best[1]):
                best = (rows, cols)
    rows, cols = best
    x_lo, y_lo = xy.min(axis=0)
    x_hi, y_hi = xy.max(axis=0)
    if (x_hi - x_lo) >= (y_hi - y_lo):
        cols, rows = max(best), min(best)
    else:
        cols, rows = min(best), max(best)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0
    col = np.minimum((cols * (xy[:, 0] - x_lo) / x_span).astype(int), cols - 1)
    row = np.minimum((rows * (xy[:, 1] - y_lo) / y_span).astype(int), rows - 1)
    return row * cols + col


def cmd_compare_schemes(args) -> int:
    out = _out_dir(args)
    params = _radio_params(args)
    stations = _load_stations(args)
    traffic = _load_aligned_traffic(args, stations)
    day, hour, rates = _rates_for_deployment(args, stations, traffic)

    reference = data.mean_reference(stations)
    xy = data.project_to_meters(stations, reference)
    ids = [s.id for s in stations]

    keg_labels, _ = _cluster_labels(stations, args)
    grid_labels = _grid_partition(xy, args.k)

    scheme = Scheme(args.scheme)
    variants = [
        ("keg+opt", keg_labels, True),
        ("grid+opt", grid_labels, True),
        ("keg+mean", keg_labels, False),
        ("grid+mean", grid_labels, False),
    ]
    results = []
    for name, labels, optimize in variants:
        plan = placement.plan_deployment(labels, xy, rates, params, scheme=scheme,
                                         optimize_positions=optimize,
                                         station_ids=ids, expected_clusters=args.k)
        results.append((name, plan))

    worst = max(plan.total_power for _, plan in results)
    rows = ["scheme,uav_count,total_power_watts,pct_savings_vs_worst"]
    for name, plan in results:
        pct = 100.0 * (worst - plan.total_power) / worst if worst > 0 else 0.0
        rows.append(f"{name},{len(plan.cells)},{_fmt(plan.total_power)},{_fmt(pct)}")
    (out / SCHEMES_CSV).write_text("\n".join(rows) + "\n", encoding="utf-8")

    _svg_bar_chart(out / SCHEMES_SVG,
                   [name for name, _ in results],
                   [plan.total_power for _, plan in results],
                   f"Deployment schemes ({scheme.value}, day {day}, hour {hour})",
                   "total power (W)")
    best_name, best_plan = min(results, key=lambda item: item[1].total_power)
    print(f"compared 4 deployment schemes (day {day}, hour {hour}) -> {out / SCHEMES_CSV}")
    print(f"best: {best_name} at {best_plan.total_power:.6g} W, "
          f"{100.0 * (worst - best_plan.total_power) / worst:.1f}% below worst")
    return 0


def cmd_synth(args) -> int:
    out = _out_dir(args)
    scenario = data.synth_scenario(seed=args.seed, k_true=args.k_true,
                                   n_stations=args.stations, days=args.days,
                                   noise=args.noise)
    data.save_topology(scenario.stations, out / TOPOLOGY_FILE)
    data.save_traffic(scenario.traffic, out / TRAFFIC_FILE)
    print(f"wrote {len(scenario.stations)} stations x {args.days} days "
          f"-> {out / TOPOLOGY_FILE}, {out / TRAFFIC_FILE}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing and entry point
# ---------------------------------------------------------------------------

def _add_common(sub, traffic: bool = True, radio: bool = True):
    sub.add_argument("--topology", required=True, help="topology CSV (bs_id,lon,lat)")
    if traffic:
        sub.add_argument("--traffic", required=True,
                         help="traffic CSV (bs_id,day,hour,bytes)")
        sub.add_argument("--baseline", type=float, default=data.DEFAULT_BASELINE_BYTES,
                         help="bytes added to every cell on load (default 500)")
    if radio:
        sub.add_argument("--radio", help="radio parameter file (key = value)")
    sub.add_argument("--bounds", help="lon1,lat1,lon2,lat2 area filter")
    sub.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    sub.add_argument("--out", default="out", help="output directory (default ./out)")


def _add_train_flags(sub):
    sub.add_argument("--epochs", type=int, default=60, help="training epoch cap")
    sub.add_argument("--lr", type=float, default=0.5, help="learning rate in (0,1)")
    sub.add_argument("--error-threshold", type=float, default=1e-5,
                     help="stop when mean error drops below this")
    sub.add_argument("--shuffle", action="store_true",
                     help="reshuffle samples every epoch")
    sub.add_argument("--algorithm", choices=["sgd", "rprop"], default="sgd",
                     help="weight update rule (default sgd)")
    sub.add_argument("--per-station", action="store_true",
                     help="train one model per station instead of pooling")
    sub.add_argument("--early-stop", action="store_true",
                     help="stop on stalled validation error")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skyplan",
        description="Plan power-minimal UAV base-station deployments.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("predict", help="predict next-day hourly traffic")
    _add_common(p, radio=False)
    _add_train_flags(p)
    p.set_defaults(func=cmd_predict)

    p = subparsers.add_parser("cluster", help="partition stations into aerial cells")
    _add_common(p, traffic=False, radio=False)
    p.add_argument("--k", type=int, default=8, help="requested cluster count")
    p.set_defaults(func=cmd_cluster)

    p = subparsers.add_parser("deploy", help="place UAVs and compute transmit power")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--k", type=int, default=8, help="cluster count when clustering inline")
    p.add_argument("--labels", help="labels CSV from 'cluster' (else cluster inline)")
    p.add_argument("--predictions", help="predictions CSV from 'predict' (else predict inline)")
    p.add_argument("--hour", default="peak", help="hour 1..24 or 'peak' (default)")
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="rsma")
    p.add_argument("--all-schemes", action="store_true",
                   help="summarize rsma, fdma, and tdma")
    p.add_argument("--fixed-positions", action="store_true",
                   help="park UAVs at unweighted cluster means")
    p.set_defaults(func=cmd_deploy)

    p = subparsers.add_parser("compare-access",
                              help="total power of rsma/fdma/tdma over a bandwidth grid")
    _add_common(p)
    p.add_argument("--k", type=int, default=8, help="cluster count when clustering inline")
    p.add_argument("--labels", help="labels CSV from 'cluster' (else cluster inline)")
    p.add_argument("--day", type=int, default=0, help="traffic day (default: last)")
    p.add_argument("--hour", default="peak", help="hour 1..24 or 'peak' (default)")
    p.add_argument("--bandwidth-grid", default="200000:2000000:10",
                   help="lo:hi:steps in Hz (default 200000:2000000:10)")
    p.set_defaults(func=cmd_compare_access)

    p = subparsers.add_parser("compare-schemes",
                              help="four deployment variants: keg/grid x opt/mean")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--k", type=int, default=8, help="cluster count")
    p.add_argument("--predictions", help="predictions CSV from 'predict' (else predict inline)")
    p.add_argument("--hour", default="peak", help="hour 1..24 or 'peak' (default)")
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="rsma")
    p.set_defaults(func=cmd_compare_schemes)

    p = subparsers.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-true", type=int, default=8, help="true mixture components")
    p.add_argument("--stations", type=int, default=200)
    p.add_argument("--days", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_synth)

    return parser


def _configure_logging():
    level_name = os.environ.get("SKYPLAN_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SkyplanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
