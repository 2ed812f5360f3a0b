"""fairpair: pairwise data reweighting for fair learning-to-rank.

Pre-processes pairwise training data by weighting item pairs so that an
arbitrary pairwise-trained ranking model satisfies a chosen group fairness
constraint, with evaluation and baseline machinery included.
"""

from .constraints import (
    ConstraintKind,
    GroupStats,
    compute_group_stats,
    compute_point_stats,
    pair_constraint,
    pair_constraint_mask,
    point_constraint,
    point_constraint_mask,
)
from .data import (
    Dataset,
    Item,
    Pair,
    PairSet,
    QueryGroup,
    SynthTruth,
    generate_synthetic,
    load_csv,
    make_pairs,
    save_csv,
    split_queries,
)
from .errors import ConstraintUndefined, FairpairError, ParseError, ValidationError
from .evaluation import EvalReport, auc, evaluate, fairness_score
from .model import LinearRankingModel, load_model, pair_prob, save_model, score
from .reweight import (
    Coefficients,
    DeltaMatrix,
    EnumeratedInstance,
    FairTrainConfig,
    bias_correction_identity,
    expected_bias,
    fair_train,
    pair_weight,
    pair_weights,
    pointwise_reweight_train,
)
from .training import (
    AdamState,
    TrainConfig,
    adam_update,
    loss_gradient,
    pair_loss,
    train_pointwise,
    train_weighted,
    weighted_loss,
)

__version__ = "0.1.0"
