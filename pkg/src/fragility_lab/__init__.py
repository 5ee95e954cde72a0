"""Adversarial fragility of small networks, measured against the minimum-distance classifier."""

from .analysis import (
    CompressionReport,
    analyze_linear,
    compression_fraction,
    d_change,
    linear_compression_angles,
    local_ratio_rho,
    path_integral,
    path_integral_m,
    path_profile,
)
from .attacks import (
    AttackOutcome,
    iterative_gradient_attack,
    local_projection_attack,
    probe_subspace_attack,
    thm1_attack,
    thm5_attack,
)
from .datagen import (
    Dataset,
    PathSpec,
    boundary_pair,
    gen_generative_chain,
    gen_hypercube,
    gen_orthogonal_label,
    make_path,
)
from .exceptions import (
    DegenerateError,
    DimensionError,
    DivergenceError,
    DomainError,
    FragilityError,
    SingularMatrixError,
    UnsupportedModelError,
    VanishingGradientError,
)
from .models import (
    Layer,
    MLPClassifier,
    TrainConfig,
    TrainReport,
    ideal_hypercube_net,
    ideal_two_layer,
    train,
)
from .oracle import MinDistanceClassifier, min_distance_classify, oracle_flip, oracle_flip_radius
from .rmt import (
    chernoff_tail_bound,
    child_seed,
    make_rng,
    min_pairwise_distance,
    qr_decompose,
    sample_chi,
    sample_gaussian_matrix,
    sample_product_r,
)

__version__ = "0.1.0"
