import math
from fractions import Fraction

import pytest

import packetgraph as pg

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)


@pytest.fixture
def basis1():
    return pg.make_basis([("t0", 1.0)])


@pytest.fixture
def basis3():
    return pg.make_basis([("t1", 1.0), ("t2", SQRT2), ("t3", SQRT3)])


@pytest.fixture
def star_equal(basis1):
    one = basis1.symbol("t0")
    return pg.build_graph(
        ["c", "l1", "l2", "l3"],
        [("e1", "c", "l1", one), ("e2", "c", "l2", one), ("e3", "c", "l3", one)],
        basis1,
    )


@pytest.fixture
def theta_112(basis1):
    one = basis1.symbol("t0")
    return pg.build_graph(
        ["v1", "v2"],
        [("e1", "v1", "v2", one), ("e2", "v1", "v2", one),
         ("e3", "v1", "v2", 2 * one)],
        basis1,
    )


@pytest.fixture
def theta_indep(basis3):
    return pg.build_graph(
        ["v1", "v2"],
        [("e1", "v1", "v2", basis3.symbol("t1")),
         ("e2", "v1", "v2", basis3.symbol("t2")),
         ("e3", "v1", "v2", basis3.symbol("t3"))],
        basis3,
    )


@pytest.fixture
def star_indep(basis3):
    return pg.build_graph(
        ["c", "l1", "l2", "l3"],
        [("e1", "c", "l1", basis3.symbol("t1")),
         ("e2", "c", "l2", basis3.symbol("t2")),
         ("e3", "c", "l3", basis3.symbol("t3"))],
        basis3,
    )


@pytest.fixture
def loop_pendant(basis1):
    one = basis1.symbol("t0")
    return pg.build_graph(
        ["u", "w"],
        [("loop", "u", "u", one), ("pend", "u", "w", 2 * one)],
        basis1,
    )


@pytest.fixture
def path_12(basis1):
    one = basis1.symbol("t0")
    return pg.build_graph(
        ["u", "v", "w"],
        [("e1", "u", "v", one), ("e2", "v", "w", 2 * one)],
        basis1,
    )


@pytest.fixture
def triangle(basis1):
    one = basis1.symbol("t0")
    return pg.build_graph(
        ["x", "y", "z"],
        [("e1", "x", "y", one), ("e2", "y", "z", one), ("e3", "z", "x", one)],
        basis1,
    )


@pytest.fixture
def star_rank2():
    b = pg.make_basis([("t0", 1.0), ("t3", SQRT2)])
    return pg.build_graph(
        ["c", "l1", "l2", "l3"],
        [("e1", "c", "l1", b.symbol("t0")),
         ("e2", "c", "l2", b.symbol("t0", 2)),
         ("e3", "c", "l3", b.symbol("t3"))],
        b,
    )


def halfway(g, edge_id):
    return g.edge(edge_id).time * Fraction(1, 2)


ENGINES = ["python"] + (["cython"] if pg.HAVE_COMPILED else [])
