"""Certified element-wise Jacobian bounds for feed-forward networks."""

from .actbounds import GradRange, derivative_at, derivative_range, derivative_ranges, global_range
from .cert import (
    Certificate,
    CertificationError,
    ExclusionResult,
    certify_radius,
    exclusion_radius,
    lipschitz_integral_bound,
)
from .jacbound import (
    JacobianBounds,
    MergedMatrices,
    bound_two_layer,
    compute_lu,
    fastlip,
    jacobian_bounds,
    merged_matrices,
    recurjac_backward,
    recurjac_forward,
    term_I_bounds,
)
from .kernels import BACKEND
from .lipschitz import (
    LipschitzResult,
    lipschitz_inf_refined,
    lipschitz_p,
    local_lipschitz,
    naive_global_lipschitz,
    worst_case_matrix,
)
from .model import (
    ActivationKind,
    Layer,
    MaxPoolSpec,
    ModelError,
    Network,
    RELU,
    expand_maxpool,
    forward,
    jacobian_at,
    load_network,
    margin_network,
    network_from_json,
    save_network,
)
from .oracle import enumerate_exact, finite_diff_jacobian, sample_lipschitz_lower
from .preact import Ball, LayerIntervals, global_intervals, grad_ranges, interval_propagate, layer_intervals

__version__ = "0.1.0"
