"""Event-driven packet dynamics on metric graphs, with exact time algebra,
lattice-point counting oracles and closed-form asymptotic predictors."""

from .errors import (
    AmbiguousOrderingError,
    ConfigError,
    GraphError,
    LatticeError,
    PacketGraphError,
    QueryHorizonError,
    RegimeError,
    ResourceLimitError,
    SimulationError,
    TimeAlgebraError,
)
from .timealg import (
    EventTime,
    TimeBasis,
    add,
    compare,
    make_basis,
    rational_rank,
    scale,
    to_real,
)
from .graph import (
    END_A,
    END_B,
    Code,
    CycleData,
    Edge,
    MetricGraph,
    TurningPointError,
    build_graph,
    chain_boundary,
    codes,
    cycle_rank,
    dump_graph,
    even_cycle_exists,
    load_graph,
    odd_cycle_exists,
    travel_time_from_potential,
)
from .dynamics import (
    CountSeries,
    EventLog,
    InitialCondition,
    scatter,
    scattering_matrix,
    simulate,
)
from .lattice import (
    arrival_times_brute,
    code_count,
    code_times_exact,
    frobenius_bound,
    representable,
    simplex_count,
)
from .asymptotics import (
    PredictionReport,
    check_relation,
    classify_regime,
    leading_coefficient,
    predict,
    radiation_coefficient,
    rank1_limit,
    rank2_star_slope,
    uniform_density,
)
from .engine import HAVE_COMPILED, default_engine

__version__ = "0.1.0"
