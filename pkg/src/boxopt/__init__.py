"""boxopt: variable-height transport packaging optimization.

Pipeline: generate a box grid, derive cartons with crease lines, compute the
bit-packed fitting matrix (KD-tree accelerated), then select M cartons
minimizing total empty shipping volume via Benders decomposition with an
analytic sub-problem.
"""

from .binpack import DEFAULT_NODE_BUDGET, FitQuery, FitVerdict, fits, fits_dims
from .errors import (
    BackendError,
    BoxoptError,
    ConfigurationError,
    FormatError,
    InfeasibleSubproblemError,
    NonMonotoneOracleError,
    ParseError,
    SizeError,
)
from .fitmatrix import BitMatrix, EvalStats, deserialize, evaluate_exhaustive, serialize
from .kdtree import (
    GridSpec,
    KdConfig,
    Region,
    diag_point,
    evaluate_all,
    evaluate_unit,
    predicted_worst_case_evals,
)
from .master import (
    BendersInstance,
    BendersResult,
    MipModel,
    SolveResult,
    benders_loop,
    build_direct,
    build_master_x,
    build_master_xy,
    solve_mip,
    write_mps,
)
from .model import (
    Box,
    Carton,
    CreaseRule,
    Dim3,
    Item,
    PackingUnit,
    ProblemConfig,
    RelTable,
    SyntheticSpec,
    derive_cartons,
    generate_box_grid,
    generate_synthetic_units,
    ingest_packing_units,
)
from .subproblem import (
    Availability,
    CartonSelection,
    Cut,
    CutPool,
    DualSolution,
    expand_cartons_to_boxes,
    fast_dual,
    make_box_cut,
    naive_dual,
    transform_cut,
)

__version__ = "0.1.0"
