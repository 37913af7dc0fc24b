"""Command-line front end: simulate, predict, lattice, compare, fit."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from . import lattice as lattice_mod
from .dynamics import CountSeries
from .errors import (
    EXIT_OK,
    EXIT_TOLERANCE,
    ConfigError,
    PacketGraphError,
    exit_code_for,
)
from .graph import load_graph
from .harness import (
    ExperimentConfig,
    detect_stabilization,
    emit,
    fit_leading_coefficient,
    fit_series,
    run_experiment,
    _json_text,
)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="packetgraph",
        description="Packet dynamics on metric graphs: simulate, predict, count.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulation and sample counts")
    sim.add_argument("--graph", required=True, help="graph spec JSON file")
    sim.add_argument("--edge", required=True, help="edge the packet starts on")
    sim.add_argument("--offset", default="1/2",
                     help="start offset: p/q of the edge time, or p/q*symbol")
    sim.add_argument("--dir", required=True, dest="direction",
                     help="vertex moved toward, or end label a/b")
    sim.add_argument("--both", action="store_true",
                     help="emit packets in both directions")
    sim.add_argument("--horizon", type=float, required=True)
    sim.add_argument("--samples", type=int, default=100)
    sim.add_argument("--log-grid", action="store_true")
    sim.add_argument("--dep-pair", action="append", default=[],
                     metavar="VERTEX:EDGE",
                     help="extra departure-count column (repeatable)")
    sim.add_argument("--engine", choices=["python", "cython"], default=None)
    sim.add_argument("--events", action="store_true",
                     help="also dump the raw event log (JSON lines)")
    sim.add_argument("--out", required=True, help="output path prefix")

    pre = sub.add_parser("predict", help="closed-form predictions for a graph")
    pre.add_argument("--graph", required=True)
    pre.add_argument("--out", default=None, help="report path (default stdout)")

    lat = sub.add_parser("lattice", help="brute-force lattice counts")
    lat.add_argument("--times", required=True,
                     help="comma-separated positive travel times")
    lat.add_argument("--T", type=float, required=True, dest="bound")
    lat.add_argument("--code", default=None,
                     help="parity bits, e.g. 101, for a code-constrained count")
    lat.add_argument("--cap", type=int, default=lattice_mod.DEFAULT_CAP)

    cmp_ = sub.add_parser("compare", help="measured series vs predicted report")
    cmp_.add_argument("--series", required=True)
    cmp_.add_argument("--prediction", required=True)
    cmp_.add_argument("--tolerance", type=float, required=True,
                      help="max relative error, percent")
    cmp_.add_argument("--window", type=float, default=0.5)
    cmp_.add_argument("--graph", default=None,
                      help="graph file, enables per-edge share comparison")
    cmp_.add_argument("--out", default=None)

    fit = sub.add_parser("fit", help="fit c*t^degree to a series")
    fit.add_argument("--series", required=True)
    fit.add_argument("--degree", type=int, required=True)
    fit.add_argument("--window", type=float, default=0.5)
    return p


def _cmd_simulate(args) -> int:
    dep_pairs = []
    for spec in args.dep_pair:
        if ":" not in spec:
            raise ConfigError(f"bad --dep-pair {spec!r}, expected VERTEX:EDGE")
        v, e = spec.split(":", 1)
        dep_pairs.append((v, e))
    config = ExperimentConfig(
        graph_path=args.graph, edge=args.edge, direction=args.direction,
        offset=args.offset, emit_both=args.both, horizon=args.horizon,
        samples=args.samples, log_grid=args.log_grid, fit_window=0.5,
        dep_pairs=dep_pairs, engine=args.engine,
    )
    result = run_experiment(config)
    emit(result["series"], "csv", args.out + ".series.csv")
    emit(result, "json", args.out + ".report.json")
    if args.events:
        g = load_graph(args.graph)
        from .harness import parse_offset
        from .dynamics import InitialCondition, simulate
        edge = g.edge(args.edge)
        init = InitialCondition(args.edge,
                                parse_offset(args.offset, g.basis, edge.time),
                                args.direction, args.both)
        log = simulate(g, init, g.basis.from_real(args.horizon),
                       engine=args.engine)
        log.to_jsonl(args.out + ".events.jsonl")
    return EXIT_OK


def _cmd_predict(args) -> int:
    from .asymptotics import predict

    report = predict(load_graph(args.graph))
    if args.out:
        emit(report, "json", args.out)
    else:
        sys.stdout.write(_json_text(dict(report.__dict__)) + "\n")
    return EXIT_OK


def _cmd_lattice(args) -> int:
    try:
        times = [float(x) for x in args.times.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --times: {exc}") from exc
    out = {"times": times, "T": args.bound}
    if args.code is not None:
        if any(c not in "01" for c in args.code):
            raise ConfigError("--code must be a 0/1 bit string")
        code = [int(c) for c in args.code]
        out["code"] = args.code
        out["count"] = lattice_mod.code_count(code, times, args.bound,
                                              cap=args.cap)
    else:
        out["count"] = lattice_mod.simplex_count(times, args.bound,
                                                 cap=args.cap)
    sys.stdout.write(_json_text(out) + "\n")
    return EXIT_OK


def _cmd_compare(args) -> int:
    series = CountSeries.from_csv(args.series)
    with open(args.prediction, "r", encoding="utf-8") as fh:
        prediction = json.load(fh)
    if "prediction" in prediction:  # full experiment report
        prediction = prediction["prediction"]
    regime = prediction.get("regime")
    rows = []

    def add(name, measured, predicted):
        rel = (abs(measured - predicted) / abs(predicted)
               if predicted else float("inf"))
        rows.append({"quantity": name, "measured": measured,
                     "predicted": predicted, "rel_error": rel})

    if regime == "independent":
        degree = int(prediction["n_edges"]) - 1
        c_fit, _se = fit_leading_coefficient(series, degree, args.window)
        add("C", c_fit, prediction["C"])
        for v, e in series.dep_pairs:
            d_fit, _ = fit_series(series.t, series.departure_counts(v, e),
                                  degree + 1, args.window)
            add(f"R_{v}_{e}", d_fit, prediction["R"])
        if args.graph:
            g = load_graph(args.graph)
            s = sum(e.time.witness for e in g.edges)
            _t, _te, n_last, per_edge, _d = series.rows[-1]
            for e, ne in zip(g.edges, per_edge):
                add(f"edge_share_{e.id}", ne / n_last, e.time.witness / s)
    elif regime == "rank1":
        stab = detect_stabilization(series)
        add("final_count", stab["final_count"], prediction["rank1_limit"])
        if not stab["stabilized"]:
            rows.append({"quantity": "stabilized", "measured": 0.0,
                         "predicted": 1.0, "rel_error": 1.0})
    elif regime == "star_rank2":
        slope, _se = fit_leading_coefficient(series, 1, args.window)
        add("slope", slope, prediction["rank2_slope"])
    else:
        raise ConfigError(f"cannot compare in regime {regime!r}")

    ok = all(r["rel_error"] <= args.tolerance / 100.0 for r in rows)
    result = {"tolerance_pct": args.tolerance, "ok": ok, "rows": rows}
    if args.out:
        emit(result, "json", args.out)
    else:
        sys.stdout.write(_json_text(result) + "\n")
    return EXIT_OK if ok else EXIT_TOLERANCE


def _cmd_fit(args) -> int:
    series = CountSeries.from_csv(args.series)
    estimate, stderr = fit_leading_coefficient(series, args.degree, args.window)
    sys.stdout.write(_json_text({"estimate": estimate, "stderr": stderr,
                                 "degree": args.degree,
                                 "window": args.window}) + "\n")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "predict": _cmd_predict,
    "lattice": _cmd_lattice,
    "compare": _cmd_compare,
    "fit": _cmd_fit,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except PacketGraphError as exc:
        sys.stderr.write(f"packetgraph {args.command}: error: {exc}\n")
        return exit_code_for(exc)
    except OSError as exc:
        sys.stderr.write(f"packetgraph {args.command}: i/o error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
