"""Closed-form predictors for long-time packet counts.

Three commensurability regimes are supported: fully independent travel
times (polynomial growth with explicit leading coefficients), rank-1
commensurable times (the count stabilizes at an integer), and the
rank-2 three-star (linear growth with an explicit slope). Anything else
is classified as unsupported and the predictors refuse rather than
extrapolate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .errors import RegimeError
from .graph import MetricGraph, cycle_rank, odd_cycle_exists
from .timealg import EventTime, rational_rank

REGIME_INDEPENDENT = "independent"
REGIME_RANK1 = "rank1"
REGIME_STAR_RANK2 = "star_rank2"
REGIME_UNSUPPORTED = "unsupported"

_MAX_FACTORIAL = 20


def _factorial(n: int) -> int:
    if n > _MAX_FACTORIAL:
        raise RegimeError(f"factorial({n}) beyond supported size {_MAX_FACTORIAL}")
    return math.factorial(n)


def _times_of(g: MetricGraph, times) -> list[EventTime]:
    return list(times) if times is not None else g.travel_times()


def _check_no_degree_two(g: MetricGraph) -> None:
    for v in g.vertices:
        if g.degree(v) == 2:
            raise RegimeError(
                f"vertex {v!r} has degree 2; predictors exclude such graphs"
            )


def _check_independent(g: MetricGraph, times: Sequence[EventTime]) -> None:
    if rational_rank(times) != len(times):
        raise RegimeError(
            "travel times are not rationally independent; regime mismatch"
        )


def uniform_density(times: Sequence[Union[EventTime, float]]) -> float:
    """Limit density 1/sum(t_j) of packets per unit travel time."""
    total = sum(t.witness if isinstance(t, EventTime) else float(t)
                for t in times)
    if not total > 0:
        raise RegimeError("travel times must be positive")
    return 1.0 / total


def leading_coefficient(g: MetricGraph, times=None) -> float:
    """Coefficient of t^(E-1) in the total packet count, independent times.

    Evaluates sum(t_j) / (2^(V-2) * (E-1)! * prod(t_j)) at the witness
    values.
    """
    ts = _times_of(g, times)
    _check_no_degree_two(g)
    _check_independent(g, ts)
    e = len(ts)
    s = sum(t.witness for t in ts)
    p = math.prod(t.witness for t in ts)
    return s / (2.0 ** (g.n_vertices - 2) * _factorial(e - 1) * p)


def radiation_coefficient(g: MetricGraph, times=None) -> float:
    """Coefficient of t^E in the per-(vertex, edge) departure count.

    Computed as 1 / (2^(V-1) * E! * prod(t_j)) and cross-checked against
    the equivalent cycle-space form 2^beta / (2^E * E! * prod(t_j)).
    """
    ts = _times_of(g, times)
    _check_no_degree_two(g)
    _check_independent(g, ts)
    e = len(ts)
    p = math.prod(t.witness for t in ts)
    via_vertices = 1.0 / (2.0 ** (g.n_vertices - 1) * _factorial(e) * p)
    beta = cycle_rank(g).beta
    via_cycles = 2.0 ** beta / (2.0 ** e * _factorial(e) * p)
    if abs(via_cycles - via_vertices) > 1e-12 * via_vertices:
        raise AssertionError(
            "radiation coefficient forms disagree; cycle rank inconsistent"
        )
    return via_vertices


def check_relation(g: MetricGraph, times=None) -> tuple[float, float, float]:
    """(C, R, residual) for the identity C = 2 E R sum(t_j)."""
    ts = _times_of(g, times)
    c = leading_coefficient(g, ts)
    r = radiation_coefficient(g, ts)
    e = len(ts)
    s = sum(t.witness for t in ts)
    residual = abs(c - 2.0 * e * r * s) / c
    return c, r, residual


def _rank1_decomposition(times: Sequence[EventTime]) -> tuple[list[int], EventTime]:
    """Write rank-1 times as coprime integer multiples of a common time.

    Returns (n, t0) with times[i] == n[i] * t0 exactly, gcd(n) = 1.
    """
    ref = times[0]
    name = next(iter(ref.coeffs))
    qs = []
    for t in times:
        q = t.coeff(name) / ref.coeff(name)
        if t != q * ref:
            raise RegimeError("travel times do not have rational rank 1")
        qs.append(q)
    denom = math.lcm(*(q.denominator for q in qs))
    ints = [int(q * denom) for q in qs]
    if any(i <= 0 for i in ints):
        raise RegimeError("travel times must be positive multiples of a common time")
    common = math.gcd(*ints)
    return [i // common for i in ints], ref * Fraction(common, denom)


def rank1_limit(g: MetricGraph, weights: Sequence[int],
                t0_symbol: Optional[str] = None) -> int:
    """Stabilized packet count for travel times weights[i] * t0.

    2 * sum(weights) when some cycle has odd total weight (the unit-edge
    subdivision is non-bipartite: departures eventually occur on the full
    integer time lattice and every directed edge slot stays occupied);
    sum(weights) otherwise (bipartite case: departures keep a fixed
    parity and half the slots are occupied). Assumes the default
    single-direction initial condition.
    """
    weights = [int(n) for n in weights]
    if len(weights) != g.n_edges:
        raise RegimeError(f"expected {g.n_edges} weights, got {len(weights)}")
    if any(n < 1 for n in weights):
        raise RegimeError("weights must be positive integers")
    if math.gcd(*weights) != 1:
        raise RegimeError("weights must have gcd 1")
    if t0_symbol is not None:
        g.basis.index(t0_symbol)
    total = sum(weights)
    return 2 * total if odd_cycle_exists(g, weights) else total


def rank2_star_slope(n: int, m: int,
                     t0: Union[float, EventTime],
                     t3: Union[float, EventTime]) -> float:
    """Linear growth rate of the packet count on the rank-2 three-star.

    Star with leg travel times n*t0, m*t0 (gcd(n, m) = 1) and t3 rationally
    independent of t0: slope = ((m + n)/t3 + 1/t0) / 2.
    """
    if n < 1 or m < 1 or math.gcd(n, m) != 1:
        raise RegimeError("n and m must be positive coprime integers")
    if isinstance(t0, EventTime) and isinstance(t3, EventTime):
        if rational_rank([t0, t3]) != 2:
            raise RegimeError("t0 and t3 must be rationally independent (rank 2)")
        w0, w3 = t0.witness, t3.witness
    else:
        w0 = t0.witness if isinstance(t0, EventTime) else float(t0)
        w3 = t3.witness if isinstance(t3, EventTime) else float(t3)
        ratio = w3 / w0
        # only rationals with small numerator and denominator are
        # detectable from doubles; quadratic-irrational convergents stay
        # ~1/q^2 away, far above ulp scale
        approx = Fraction(ratio).limit_denominator(10**4)
        if (approx.numerator <= 10**4
                and abs(ratio - float(approx)) < 1e-14 * abs(ratio)):
            raise RegimeError(
                f"t3/t0 is rational ({approx}) at double precision; rank is not 2"
            )
    if not (w0 > 0 and w3 > 0):
        raise RegimeError("travel times must be positive")
    return 0.5 * ((m + n) / w3 + 1.0 / w0)


def is_three_star(g: MetricGraph) -> bool:
    if g.n_vertices != 4 or g.n_edges != 3:
        return False
    degrees = sorted(g.degree(v) for v in g.vertices)
    return degrees == [1, 1, 1, 3]


def classify_regime(times: Sequence[EventTime],
                    graph: Optional[MetricGraph] = None) -> str:
    """One of independent / rank1 / star_rank2 / unsupported."""
    rank = rational_rank(times)
    e = len(times)
    if rank == e:
        return REGIME_INDEPENDENT
    if rank == 1:
        return REGIME_RANK1
    if e == 3 and rank == 2 and (graph is None or is_three_star(graph)):
        for i in range(3):
            for j in range(i + 1, 3):
                if rational_rank([times[i], times[j]]) == 1:
                    return REGIME_STAR_RANK2
    return REGIME_UNSUPPORTED


@dataclass
class PredictionReport:
    """Closed-form predictions for one graph, by regime."""

    regime: str
    n_edges: int
    n_vertices: int
    C: Optional[float] = None
    R: Optional[float] = None
    arrival_leading: Optional[float] = None
    uniform_density: Optional[float] = None
    rank1_limit: Optional[int] = None
    rank2_slope: Optional[float] = None

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PredictionReport":
        return cls(**json.loads(text))


def predict(g: MetricGraph) -> PredictionReport:
    """Dispatch to the regime's predictors; refuses unsupported regimes."""
    ts = g.travel_times()
    regime = classify_regime(ts, g)
    report = PredictionReport(regime=regime, n_edges=g.n_edges,
                              n_vertices=g.n_vertices)
    if regime == REGIME_INDEPENDENT:
        report.C = leading_coefficient(g, ts)
        report.R = radiation_coefficient(g, ts)
        report.arrival_leading = report.R
        report.uniform_density = uniform_density(ts)
    elif regime == REGIME_RANK1:
        weights, _t0 = _rank1_decomposition(ts)
        report.rank1_limit = rank1_limit(g, weights)
    elif regime == REGIME_STAR_RANK2:
        pair = None
        for i in range(3):
            for j in range(i + 1, 3):
                if rational_rank([ts[i], ts[j]]) == 1:
                    pair = (i, j)
        if pair is None:
            raise RegimeError("no commensurable pair in star_rank2 regime")
        i, j = pair
        k3 = next(k for k in range(3) if k not in pair)
        (n, m), t0 = _rank1_decomposition([ts[i], ts[j]])
        report.rank2_slope = rank2_star_slope(n, m, t0, ts[k3])
    return report
