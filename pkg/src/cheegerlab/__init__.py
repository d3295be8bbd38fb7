"""cheegerlab: weighted ratio minimizers and inequality checks on grids.

The package discretizes sets as cell masks on square grids, measures them
with weighted volumes and anisotropic crossing-count perimeters, minimizes
perimeter-to-powered-volume ratios by exact enumeration or parametric
min-cut iteration, and empirically audits the isoperimetric, trace and
volume-growth inequalities those ratios obey.  A fat-Cantor construction
supplies a domain on which naive boundary bookkeeping fails.
"""

from .grid import (
    STENCIL4,
    STENCIL16,
    Anisotropy,
    CellSet,
    Grid,
    GridError,
    ScalarField,
    Stencil,
    connected_components,
    make_annulus,
    make_disk,
    stencil_by_name,
    subsets_of,
)
from .gridio import (
    MaskIOError,
    load_field_text,
    load_mask_pgm,
    load_mask_text,
    save_field_text,
    save_mask_pgm,
    save_mask_text,
    write_csv,
)
from .measures import (
    CROFTON_AXIS,
    CROFTON_DIAG,
    CROFTON_KNIGHT,
    SECTOR_AXIS,
    SECTOR_DIAG,
    SECTOR_KNIGHT,
    ComparabilityError,
    ComparabilityReport,
    IsoperimetricReport,
    MeasureError,
    PerimeterDecomposition,
    ball_ratio,
    check_weighted_isoperimetric,
    comparability_check,
    crofton_weights,
    domain_crossing_arcs,
    euclidean_perimeter,
    isoperimetric_constant,
    relative_perimeters,
    unit_ball_volume,
    weighted_perimeter,
    weighted_volume,
)
from .maxflow import FlowNetwork
from .solver import (
    CheegerProblem,
    CheegerResult,
    CutGraph,
    SolveOptions,
    SolverError,
    build_cut_graph,
    dinkelbach_solve,
    max_flow,
    oracle_solve,
    ratio_of,
    solve,
)
from .sampling import sample_subsets, sampling_mode
from .verify import (
    GrowthReport,
    GrowthRow,
    LemmaReport,
    SupEstimate,
    VerifyError,
    ball_growth_derivative,
    check_lemma_relperimeter,
    localized_sup,
    relative_isoperimetric_constant,
    trace_constant,
    volume_growth_check,
)
from .cantor import (
    CantorDomain,
    CantorError,
    CantorResolutionWarning,
    CantorSpec,
    GapReport,
    GapRow,
    ProbeAttempt,
    ProbeReport,
    boundary_gap_report,
    build_cantor_set,
    build_domain,
    bump_area,
    bump_profile,
    cantor_grid,
    cantor_limit_length,
    self_cheeger_probe,
)

__version__ = "0.1.0"
