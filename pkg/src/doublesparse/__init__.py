"""Double-sparse linear regression: estimators, inference, and recovery checks.

Coefficients are simultaneously element-wise and group-wise sparse; the
package provides penalized and constrained solvers for the combined
l1 + group-norm regularizer, theory-driven and cross-validated tuning,
debiased estimation with confidence intervals, numerical verification of
the exact-recovery conditions, and a reproducible experiment harness.
"""

from .groups import (
    Dataset,
    GroupPartition,
    GroupedVector,
    SparsityPattern,
    is_sparse,
    mixed_norm,
    sparsity_of,
)
from .prox import (
    ProxSpec,
    group_soft_threshold,
    soft_threshold,
    sparse_group_prox,
    sparse_group_prox_array,
)
from .solvers import (
    SolveOptions,
    SolverResult,
    kkt_residual_sgl,
    solve_group_lasso,
    solve_l1_min,
    solve_l12_min,
    solve_lasso,
    solve_noiseless,
    solve_scaled_sgl,
    solve_sgl,
)
from .tuning import TuningSpec, cv_select, default_grid, default_lambdas
from .simgen import (
    DesignSpec,
    SignalSpec,
    derive_seed,
    generate_design,
    generate_response,
    generate_signal,
    make_dataset,
)
from .certificate import (
    CertificateReport,
    certificate_verify,
    default_batches,
    exact_target,
    golfing_construct,
    irrepresentable_margin,
    rip_check,
    run_certificate_pipeline,
)
from .inference import (
    ConfidenceInterval,
    DebiasResult,
    InfeasibleConstraintError,
    confidence_intervals,
    debias,
    estimate_M,
    estimate_M_row,
)
from .dataio import load_dataset, save_dataset
from .estimators import (
    DebiasedSparseGroupLasso,
    ScaledSparseGroupLasso,
    SparseGroupLasso,
    SparseGroupLassoCV,
)

__version__ = "0.1.0"
