"""Exact arithmetic and ordering for event times.

An event time is a rational-coefficient combination of named basis times
that the caller declares pairwise linearly independent over the rationals.
Each basis symbol carries a positive floating-point witness value, used
only for ordering (and reporting); all arithmetic on the coefficients is
exact. Equality is decided purely on the canonical coefficient vector, so
merging of simultaneous events never depends on floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

from .errors import AmbiguousOrderingError, TimeAlgebraError

RationalLike = Union[int, Fraction]

DEFAULT_EPSILON = 1e-9


@dataclass(frozen=True)
class TimeBasis:
    """Ordered set of named, positive, declared-independent basis times."""

    names: tuple[str, ...]
    witnesses: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(set(self.names)):
            raise TimeAlgebraError("duplicate basis symbol name")
        for name, w in zip(self.names, self.witnesses):
            if not (w > 0.0 and math.isfinite(w)):
                raise TimeAlgebraError(
                    f"witness for {name!r} must be positive and finite, got {w}"
                )

    @property
    def rank(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise TimeAlgebraError(f"unknown basis symbol {name!r}") from None

    def zero(self) -> "EventTime":
        return EventTime(self, ())

    def symbol(self, name: str, coeff: RationalLike = 1) -> "EventTime":
        """The event time coeff * <name>."""
        q = Fraction(coeff)
        if q == 0:
            return self.zero()
        return EventTime(self, ((self.index(name), q),))

    def time(self, coeffs: Mapping[str, RationalLike]) -> "EventTime":
        """Build an event time from a {symbol name: rational} mapping."""
        items = []
        for name, value in coeffs.items():
            q = Fraction(value)
            if q != 0:
                items.append((self.index(name), q))
        items.sort()
        return EventTime(self, tuple(items))

    def from_real(self, value: float, max_denominator: int = 10**6) -> "EventTime":
        """Rational multiple of the first symbol approximating a real value.

        Used at CLI boundaries to turn a real horizon or sample time into
        an exact time; the approximation error is below 1/max_denominator.
        """
        if not self.names:
            raise TimeAlgebraError("empty basis")
        q = Fraction(value / self.witnesses[0]).limit_denominator(max_denominator)
        return self.symbol(self.names[0], q)

    def to_json(self) -> list[dict]:
        return [{"name": n, "witness": w} for n, w in zip(self.names, self.witnesses)]

    @classmethod
    def from_json(cls, data: Sequence[Mapping]) -> "TimeBasis":
        names, wits = [], []
        for entry in data:
            extra = set(entry) - {"name", "witness"}
            if extra:
                raise TimeAlgebraError(f"unknown basis field(s) {sorted(extra)}")
            names.append(str(entry["name"]))
            wits.append(float(entry["witness"]))
        return cls(tuple(names), tuple(wits))


def make_basis(specs: Iterable[tuple[str, float]]) -> TimeBasis:
    """Basis from (name, witness) pairs, validating names and witnesses."""
    specs = list(specs)
    return TimeBasis(tuple(n for n, _ in specs), tuple(float(w) for _, w in specs))


class EventTime:
    """Immutable rational combination of basis times, in canonical form.

    Canonical form stores only nonzero coefficients, sorted by basis
    index, each in lowest terms (Fraction guarantees that). Two event
    times are equal iff their canonical vectors are identical.
    """

    __slots__ = ("basis", "_coeffs", "_witness", "_hash")

    def __init__(self, basis: TimeBasis, coeffs: tuple[tuple[int, Fraction], ...]):
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "_coeffs", coeffs)
        w = 0.0
        for k, q in coeffs:
            w += float(q) * basis.witnesses[k]
        object.__setattr__(self, "_witness", w)
        object.__setattr__(self, "_hash", hash((basis.names, coeffs)))

    def __setattr__(self, name, value):
        raise AttributeError("EventTime is immutable")

    @property
    def coeffs(self) -> dict[str, Fraction]:
        """Canonical mapping {symbol name: coefficient} (zeros absent)."""
        return {self.basis.names[k]: q for k, q in self._coeffs}

    @property
    def witness(self) -> float:
        """Floating-point evaluation against the basis witnesses."""
        return self._witness

    def is_zero(self) -> bool:
        return not self._coeffs

    def coeff(self, name: str) -> Fraction:
        k = self.basis.index(name)
        for i, q in self._coeffs:
            if i == k:
                return q
        return Fraction(0)

    def _check_same_basis(self, other: "EventTime") -> None:
        if not isinstance(other, EventTime):
            raise TypeError(f"expected EventTime, got {type(other).__name__}")
        if self.basis != other.basis:
            raise TimeAlgebraError("event times over different bases")

    def __add__(self, other: "EventTime") -> "EventTime":
        self._check_same_basis(other)
        acc = dict(self._coeffs)
        for k, q in other._coeffs:
            s = acc.get(k, Fraction(0)) + q
            if s == 0:
                acc.pop(k, None)
            else:
                acc[k] = s
        return EventTime(self.basis, tuple(sorted(acc.items())))

    def __sub__(self, other: "EventTime") -> "EventTime":
        return self + (-other)

    def __neg__(self) -> "EventTime":
        return EventTime(self.basis, tuple((k, -q) for k, q in self._coeffs))

    def __mul__(self, q: RationalLike) -> "EventTime":
        q = Fraction(q)
        if q == 0:
            return self.basis.zero()
        return EventTime(self.basis, tuple((k, c * q) for k, c in self._coeffs))

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventTime):
            return NotImplemented
        return self.basis == other.basis and self._coeffs == other._coeffs

    def __hash__(self) -> int:
        return self._hash

    def compare(self, other: "EventTime", epsilon: float = DEFAULT_EPSILON) -> int:
        """Total-order comparison: -1, 0 or +1.

        Equality is exact (identical canonical vectors). A difference
        supported on a single basis symbol is ordered exactly by the sign
        of its coefficient. Any other nonzero difference is ordered by its
        witness value, which must exceed epsilon in magnitude; otherwise
        the declared independence cannot be trusted at witness precision
        and AmbiguousOrderingError is raised.
        """
        self._check_same_basis(other)
        if epsilon <= 0:
            raise TimeAlgebraError("epsilon must be positive")
        if self._coeffs == other._coeffs:
            return 0
        diff = self - other
        items = diff._coeffs
        if len(items) == 1:
            return 1 if items[0][1] > 0 else -1
        w = diff._witness
        if abs(w) <= epsilon:
            raise AmbiguousOrderingError(
                f"distinct times with witness gap {w:.3e} <= epsilon {epsilon:.3e}"
            )
        return 1 if w > 0 else -1

    def __repr__(self) -> str:
        if not self._coeffs:
            return "EventTime(0)"
        parts = [f"{q}*{self.basis.names[k]}" for k, q in self._coeffs]
        return f"EventTime({' + '.join(parts)})"

    def to_json(self) -> dict[str, str]:
        return {self.basis.names[k]: str(q) for k, q in self._coeffs}

    @classmethod
    def from_json(cls, basis: TimeBasis, data: Mapping[str, str]) -> "EventTime":
        return basis.time({name: Fraction(value) for name, value in data.items()})


# Spec-level functional surface (thin aliases over the methods above).

def add(a: EventTime, b: EventTime) -> EventTime:
    return a + b


def scale(a: EventTime, q: RationalLike) -> EventTime:
    return a * q


def compare(a: EventTime, b: EventTime, epsilon: float = DEFAULT_EPSILON) -> int:
    return a.compare(b, epsilon)


def to_real(a: EventTime) -> float:
    return a.witness


def rational_rank(times: Sequence[EventTime]) -> int:
    """Rank over the rationals of the coefficient vectors of the times.

    Exact Gaussian elimination on Fractions; witnesses play no role.
    """
    if not times:
        raise TimeAlgebraError("rational_rank of an empty list")
    basis = times[0].basis
    rows = []
    for t in times:
        t._check_same_basis(times[0])
        row = [Fraction(0)] * basis.rank
        for k, q in t._coeffs:
            row[k] = q
        rows.append(row)
    rank = 0
    ncols = basis.rank
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        prow = rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                factor = rows[r][col] / prow[col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], prow)]
        rank += 1
        if rank == len(rows):
            break
    return rank
