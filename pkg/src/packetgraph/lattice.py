"""Brute-force lattice-point oracles.

Everything here is deliberately naive nested enumeration: these counts
are the independent ground truth that the simulator and the closed-form
predictors are checked against, so being obviously correct beats being
fast. Enumerations fail loudly when they exceed the configured cap.
"""

from __future__ import annotations

import math
from typing import Sequence, Union

from .errors import LatticeError, ResourceLimitError
from .graph import Code, MetricGraph, codes
from .timealg import EventTime

DEFAULT_CAP = 10**8
DUPLICATE_TOL = 1e-9

TimeLike = Union[float, EventTime]


def _witness_values(times: Sequence[TimeLike]) -> list[float]:
    vals = []
    for t in times:
        v = t.witness if isinstance(t, EventTime) else float(t)
        if not v > 0.0:
            raise LatticeError(f"travel times must be positive, got {v}")
        vals.append(v)
    return vals


class _Counter:
    __slots__ = ("n", "cap")

    def __init__(self, cap: int):
        self.n = 0
        self.cap = cap

    def bump(self) -> None:
        self.n += 1
        if self.n > self.cap:
            raise ResourceLimitError(f"enumeration exceeded cap of {self.cap} tuples")


def _count_rec(ws: list[float], i: int, budget: float, counter: _Counter) -> int:
    if i == len(ws):
        counter.bump()
        return 1
    total = 0
    t = ws[i]
    n = 0
    while n * t <= budget:
        total += _count_rec(ws, i + 1, budget - n * t, counter)
        n += 1
    return total


def simplex_count(times: Sequence[TimeLike], T: float,
                  cap: int = DEFAULT_CAP) -> int:
    """Number of nonnegative integer tuples n with sum(n_i * t_i) <= T.

    Exhaustive enumeration; boundary membership for irrational times is
    decided at witness (double) precision, so T should be generic.
    """
    if T < 0:
        raise LatticeError("T must be nonnegative")
    ws = _witness_values(times)
    return _count_rec(ws, 0, float(T), _Counter(cap))


def _parities(code: Union[Code, Sequence[int]], m: int) -> tuple[int, ...]:
    ps = tuple(code.parities) if isinstance(code, Code) else tuple(code)
    if len(ps) != m:
        raise LatticeError(f"code length {len(ps)} != number of times {m}")
    if any(p not in (0, 1) for p in ps):
        raise LatticeError("code parities must be 0 or 1")
    return ps


def code_count(code: Union[Code, Sequence[int]], times: Sequence[TimeLike],
               T: float, cap: int = DEFAULT_CAP) -> int:
    """Number of tuples n >= 0 with sum(t_i * (c_i + 2 n_i)) <= T."""
    ws = _witness_values(times)
    ps = _parities(code, len(ws))
    shift = sum(p * w for p, w in zip(ps, ws))
    budget = float(T) - shift
    if budget < 0:
        return 0
    return _count_rec([2.0 * w for w in ws], 0, budget, _Counter(cap))


def code_times_exact(code: Union[Code, Sequence[int]],
                     times: Sequence[EventTime], T: float,
                     cap: int = DEFAULT_CAP) -> list[EventTime]:
    """Exact event times sum(t_i * (c_i + 2 n_i)) <= T for one code.

    Times must be EventTimes over a common basis; the bound is applied to
    the witness value. Sorted by witness.
    """
    if not times or not all(isinstance(t, EventTime) for t in times):
        raise LatticeError("code_times_exact requires EventTime travel times")
    ws = _witness_values(times)
    ps = _parities(code, len(ws))
    counter = _Counter(cap)
    basis = times[0].basis
    out: list[EventTime] = []

    def rec(i: int, acc: EventTime, budget: float) -> None:
        if i == len(times):
            counter.bump()
            out.append(acc)
            return
        step = 2 * times[i]
        base = ps[i] * times[i].witness
        cur = acc + ps[i] * times[i]
        n = 0
        while base + n * step.witness <= budget:
            rec(i + 1, cur, budget - base - n * step.witness)
            cur = cur + step
            n += 1

    rec(0, basis.zero(), float(T))
    out.sort(key=lambda t: t.witness)
    return out


def arrival_times_brute(g: MetricGraph, a: str, b: str, T: float,
                        cap: int = DEFAULT_CAP) -> list[float]:
    """All distinct code-generated arrival times at b (from a) up to T.

    Union over the 2^beta codes of their time sets, deduplicated with
    exact vector equality. Collisions within one code (commensurable
    times) dedupe silently; a collision across two distinct codes, or a
    pair of distinct values closer than 1e-9, means the declared rational
    independence is violated and raises LatticeError.
    """
    times = g.travel_times()
    seen: dict[EventTime, int] = {}
    for ci, code in enumerate(codes(g, a, b)):
        for t in code_times_exact(code, times, T, cap=cap):
            prev = seen.get(t)
            if prev is not None and prev != ci:
                raise LatticeError(
                    f"arrival time {t!r} shared by codes {prev} and {ci}; "
                    "travel times are not independent as declared"
                )
            seen[t] = ci
    values = sorted(t.witness for t in seen)
    for x, y in zip(values, values[1:]):
        if y - x <= DUPLICATE_TOL:
            raise LatticeError(
                f"arrival times {x!r} and {y!r} closer than {DUPLICATE_TOL}; "
                "witnesses too coarse for the declared independence"
            )
    return values


def representable(N: int, n: int, m: int) -> bool:
    """Whether N = alpha*n + beta*m for some alpha >= 1, beta >= 1."""
    _check_coprime(n, m)
    if N < n + m:
        return False
    beta = 1
    while beta * m <= N - n:
        if (N - beta * m) % n == 0:
            return True
        beta += 1
    return False


def frobenius_bound(n: int, m: int) -> int:
    """Least M such that every N > M is representable as above.

    Found by exhaustive check of all N up to n*m + n + m, which covers
    the classical bound for the alpha, beta >= 1 variant.
    """
    _check_coprime(n, m)
    limit = n * m + n + m
    worst = 0
    for N in range(1, limit + 1):
        if not representable(N, n, m):
            worst = N
    return worst


def _check_coprime(n: int, m: int) -> None:
    if n < 1 or m < 1:
        raise LatticeError("n and m must be positive integers")
    if math.gcd(n, m) != 1:
        raise LatticeError(f"gcd({n}, {m}) != 1")
