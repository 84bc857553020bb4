"""affectmap: margin-matched embedding spaces for machine emotional states.

Train "affective manifolds" (embedding spaces whose named states sit at
prescribed pairwise distances), infer the state of unseen signals by the
nearest state mean, and compose several manifolds into one machine mind.
"""

from .manifold import (
    AffectiveState,
    MarginMatrix,
    StateLayout,
    ManifoldSpec,
    MindSpec,
    EmbeddabilityReport,
    linear_chain_margins,
    layout_to_margins,
    canonical_margins,
    canonical_state_names,
    embeddability_check,
    classical_mds,
)
from .network import (
    LayerSpec,
    EmbeddingNetwork,
    dense,
    prelu,
    dropout,
    init_network,
    default_layers,
    forward,
    backward,
    gradient_check,
)
from .training import (
    Triplet,
    MiniBatch,
    TrainConfig,
    OptimizerState,
    sample_triplets,
    positive_loss,
    negative_loss,
    total_loss,
    loss_gradient,
    train,
    continue_train,
    dataset_loss,
)
from .inference import (
    TrainedManifold,
    InferenceResult,
    Mind,
    infer_state,
    infer_state_mahalanobis,
    mind_react,
    save_model,
    load_model,
    save_mind,
    load_mind,
)
from .data import (
    SignalDataset,
    StateAssignment,
    load_idx_images,
    load_idx_labels,
    write_idx_images,
    write_idx_labels,
    assign_states,
    dataset_from_idx,
    synth_gaussian_dataset,
)
from .evaluation import (
    EvalReport,
    evaluate,
    train_test_split,
    margin_stress,
    render_scatter_svg,
)
from .errors import (
    InsufficientDataError,
    IdxFormatError,
    DatasetConsistencyError,
    UnsupportedOperationError,
    UnsupportedDimensionError,
    TrainingDivergedError,
)

__version__ = "0.1.0"
