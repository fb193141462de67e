"""Nyström solvers for nonlocal dispersal equations with asymmetric (jumping) nonlinearities."""

from .ap_analysis import (
    APDiagram,
    NonexistenceBound,
    ProblemFamily,
    ThresholdBracket,
    bracket_threshold,
    diagram,
    nonexistence_bound,
    probe_existence,
)
from .dispersal import (
    DiscreteOperator,
    EigenPair,
    ForcingDecomposition,
    apply,
    assemble,
    decompose_forcing,
    principal_eigenpair,
    shifted_solve,
)
from .domain_kernel import Domain, Grid, KernelSpec, RowSum, audit_kernel, build_grid, eval_kernel, row_sums
from .exceptions import ConvergenceError, HypothesisError, NonlocalAPError
from .nonlinearity import HypothesisReport, Nonlinearity, audit_hypotheses, c1_offset, eval_f
from .solver import (
    Bracket,
    ProblemInstance,
    SolveReport,
    build_subsolution,
    build_supersolution,
    check_max_principle,
    monotone_iterate,
    newton_deflated,
    picard_ft,
)

__version__ = "0.1.0"
