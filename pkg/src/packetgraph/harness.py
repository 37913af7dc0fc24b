"""Experiment orchestration: sampling, coefficient fitting, reports.

Ties the simulator to the closed-form predictors: run a simulation from a
graph file, sample the count series, fit the regime's growth law over a
trailing window, and emit a comparison with deterministic, byte-stable
formatting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .asymptotics import (
    PredictionReport,
    REGIME_INDEPENDENT,
    REGIME_RANK1,
    REGIME_STAR_RANK2,
    _rank1_decomposition,
    predict,
)
from .dynamics import (
    CountSeries,
    EventLog,
    InitialCondition,
    resolve_direction,
    simulate,
)
from .errors import ConfigError
from .graph import MetricGraph, load_graph
from .timealg import EventTime, TimeBasis


@dataclass
class ExperimentConfig:
    """One simulation-versus-prediction run."""

    graph_path: str
    edge: str
    direction: str
    offset: str = "1/2"
    emit_both: bool = False
    horizon: float = 100.0
    samples: int = 100
    log_grid: bool = False
    fit_window: float = 0.5
    dep_pairs: list[tuple[str, str]] = field(default_factory=list)
    engine: Optional[str] = None

    def validate(self) -> None:
        if self.horizon <= 0:
            raise ConfigError("horizon must be positive")
        if not (0.0 < self.fit_window < 1.0):
            raise ConfigError("fit window fraction must be in (0, 1)")
        if self.samples < 2:
            raise ConfigError("need at least 2 samples")


def parse_offset(spec: str, basis: TimeBasis, edge_time: EventTime) -> EventTime:
    """Offset spec: 'p/q' (fraction of the edge travel time) or 'p/q*symbol'."""
    spec = spec.strip()
    try:
        if "*" in spec:
            frac, sym = spec.split("*", 1)
            return basis.symbol(sym.strip(), Fraction(frac.strip()))
        return edge_time * Fraction(spec)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad offset spec {spec!r}: {exc}") from exc


def sample_times(basis: TimeBasis, t_max: float, count: int,
                 log_grid: bool = False) -> list[EventTime]:
    """Exact sample grid as rational multiples of the first basis symbol.

    The top of the grid backs off the bound by a relative 1e-7 so that
    comparisons against an irrational bound are never witness-precision
    ties.
    """
    if t_max <= 0:
        raise ConfigError("sampling horizon must be positive")
    top = t_max * (1.0 - 1e-7)
    if log_grid:
        values = np.geomspace(top / 100.0, top, count)
    else:
        values = np.linspace(top / count, top, count)
    w0 = basis.witnesses[0]
    out = []
    for x in values:
        q = Fraction(float(x) / w0).limit_denominator(10**6)
        if float(q) * w0 > t_max:
            q = Fraction(float(x) * (1 - 1e-9) / w0).limit_denominator(10**6)
        out.append(basis.symbol(basis.names[0], q))
    return out


def fit_leading_coefficient(series: CountSeries, degree: int,
                            window: float = 0.5) -> tuple[float, float]:
    """Least-squares c for N(t) = c * t^degree over the trailing rows.

    Returns (estimate, standard error). The window is a fraction of the
    rows, taken from the end; at least 10 rows must remain.
    """
    if degree < 1:
        raise ConfigError("fit degree must be >= 1")
    if not (0.0 < window <= 1.0):
        raise ConfigError("fit window fraction must be in (0, 1]")
    k = int(math.ceil(window * len(series)))
    rows = series.rows[len(series) - k:]
    if len(rows) < 10:
        raise ConfigError(f"fit window has {len(rows)} rows; need >= 10")
    t = np.array([r[0] for r in rows])
    y = np.array([float(r[2]) for r in rows])
    x = t ** degree
    sxx = float(x @ x)
    if sxx <= 0:
        raise ConfigError("degenerate fit window")
    c = float(x @ y) / sxx
    resid = y - c * x
    dof = max(len(rows) - 1, 1)
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return c, stderr


def fit_series(t: np.ndarray, y: np.ndarray, degree: int,
               window: float = 0.5) -> tuple[float, float]:
    """fit_leading_coefficient for a bare (t, y) pair."""
    rows = [(float(ti), None, float(yi), [], []) for ti, yi in zip(t, y)]
    return fit_leading_coefficient(CountSeries([], [], rows), degree, window)


def detect_stabilization(series: CountSeries) -> dict:
    """Final value, last change time, and whether the series stabilized.

    Stabilization requires the count to be constant over the trailing 25%
    of the sampled horizon, with the horizon at least 4x the last change.
    """
    if len(series) == 0:
        raise ConfigError("empty series")
    ns = [r[2] for r in series.rows]
    ts = [r[0] for r in series.rows]
    final = ns[-1]
    changed = [i for i, n in enumerate(ns) if n != final]
    last_change_t = ts[changed[-1]] if changed else ts[0]
    t_max = ts[-1]
    tail_ok = all(n == final for t, n in zip(ts, ns) if t >= 0.75 * t_max)
    return {
        "final_count": final,
        "last_change_t": last_change_t,
        "stabilized": bool(tail_ok and t_max > 4.0 * last_change_t),
    }


def run_experiment(config: ExperimentConfig) -> dict:
    """Simulate per config, predict, fit, and assemble the comparison.

    Returns {"config", "prediction", "measured", "comparison", "series"};
    nothing is written to disk here, so errors never leave partial output.
    """
    config.validate()
    g = load_graph(config.graph_path)
    basis = g.basis
    edge = g.edge(config.edge)
    offset = parse_offset(config.offset, basis, edge.time)
    init = InitialCondition(config.edge, offset, config.direction,
                            config.emit_both)
    horizon = basis.from_real(config.horizon)
    log = simulate(g, init, horizon, engine=config.engine)
    reliable = log.reliable_horizon.witness
    ts = sample_times(basis, reliable, config.samples, config.log_grid)
    dep_pairs = list(config.dep_pairs)
    if not dep_pairs:
        # default: all departures out of the initial packet's first vertex
        v0 = edge.vertex_at(resolve_direction(g, config.edge, config.direction))
        dep_pairs = [(v0, e.id) for e in g.edges if v0 in (e.a, e.b)]
    series = log.count_series(ts, dep_pairs)
    report = predict(g)
    measured: dict = {"n_records": len(log), "engine": log.engine}
    comparison: list[dict] = []

    def compare_row(name: str, meas: float, pred: float) -> None:
        rel = abs(meas - pred) / abs(pred) if pred else math.inf
        comparison.append({"quantity": name, "measured": meas,
                           "predicted": pred, "rel_error": rel})

    if report.regime == REGIME_INDEPENDENT:
        c_fit, c_se = fit_leading_coefficient(series, g.n_edges - 1,
                                              config.fit_window)
        measured["C_fit"] = c_fit
        measured["C_stderr"] = c_se
        compare_row("C", c_fit, report.C)
        t_last, _te, n_last, per_edge, _d = series.rows[-1]
        s = sum(e.time.witness for e in g.edges)
        for e, ne in zip(g.edges, per_edge):
            share = ne / n_last if n_last else math.inf
            compare_row(f"edge_share_{e.id}", share, e.time.witness / s)
        for v, eid in dep_pairs:
            d_fit, d_se = fit_series(series.t, series.departure_counts(v, eid),
                                     g.n_edges, config.fit_window)
            measured[f"R_fit_{v}_{eid}"] = d_fit
            compare_row(f"R_{v}_{eid}", d_fit, report.R)
    elif report.regime == REGIME_RANK1:
        stab = detect_stabilization(series)
        measured.update(stab)
        compare_row("final_count", stab["final_count"], report.rank1_limit)
    elif report.regime == REGIME_STAR_RANK2:
        slope_fit, slope_se = fit_leading_coefficient(series, 1,
                                                      config.fit_window)
        measured["slope_fit"] = slope_fit
        measured["slope_stderr"] = slope_se
        compare_row("slope", slope_fit, report.rank2_slope)

    return {
        "config": {
            "graph": config.graph_path,
            "edge": config.edge,
            "direction": str(config.direction),
            "offset": config.offset,
            "emit_both": config.emit_both,
            "horizon": float(config.horizon),
            "samples": config.samples,
            "log_grid": config.log_grid,
            "fit_window": config.fit_window,
        },
        "prediction": dict(report.__dict__),
        "measured": measured,
        "comparison": comparison,
        "series": series,
    }


# -- deterministic emission ---------------------------------------------------------


def _json_text(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for k in sorted(obj, key=str):
            items.append(f'{pad}  {_json_text(str(k))}: '
                         f'{_json_text(obj[k], indent + 1)}')
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_json_text(x, indent + 1)}" for x in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            raise ConfigError("non-finite float in report")
        return format(obj, ".17g")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(obj, np.floating):
        return _json_text(float(obj))
    raise ConfigError(f"cannot serialize {type(obj).__name__}")


def emit(obj: Union[CountSeries, PredictionReport, dict], fmt: str,
         path: str) -> None:
    """Write a series (csv) or report (json) with byte-stable formatting.

    JSON keys are sorted and floats carry 17 significant digits, so two
    runs of the same inputs produce identical bytes.
    """
    if fmt == "csv":
        if not isinstance(obj, CountSeries):
            raise ConfigError("csv emission expects a CountSeries")
        obj.to_csv(path)
        return
    if fmt == "json":
        if isinstance(obj, PredictionReport):
            obj = dict(obj.__dict__)
        if isinstance(obj, dict) and isinstance(obj.get("series"), CountSeries):
            obj = {k: v for k, v in obj.items() if k != "series"}
        if not isinstance(obj, dict):
            raise ConfigError("json emission expects a report dict")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_json_text(obj) + "\n")
        return
    raise ConfigError(f"unknown emission format {fmt!r}")
