"""Non-interactive source simulation: Bell-state statistics, one-shared-bit
feasibility, constructive schemes and Monte Carlo checks."""

from .feasibility import (
    BinaryTarget,
    certify_advantage,
    check_binary_cr_feasible,
    check_diagonal_product_condition,
    rank_certificate,
    zeta_beta,
)
from .fourier import (
    BooleanTable,
    FourierCoefficients,
    ParitySubset,
    correlation_from_coeffs,
    fourier_expand,
    fourier_reconstruct,
    parity_eval,
)
from .harness import (
    RunConfig,
    ea_instance_to_targets,
    run_affine_monte_carlo,
    run_patched_monte_carlo,
    sample_source,
    total_variation,
)
from .quantum import (
    JointDistribution,
    Povm,
    bell_joint_distribution,
    coarse_grain,
    marginals,
    trine_povm,
    validate_povm,
)
from .sources import BiasedBitSource, BivariateBinarySource
from .synthesis import (
    AffineScheme,
    PatchedScheme,
    RealizationTargets,
    evaluate_patched_exact,
    evaluate_scheme_exact,
    solve_pair_product,
    synthesize_binary_scheme,
    synthesize_patched_scheme,
)

__version__ = "0.1.0"
