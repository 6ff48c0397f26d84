"""Technique inference from implicit-feedback matrix factorization."""

from ._core import (
    Distance,
    FactorModel,
    InteractionDataset,
    Similarity,
    SplitDataset,
    TechInferError,
    TrainedBy,
    __version__,
    evaluate,
    export_csv,
    export_navigator_layer,
    fold_in,
    load_dataset,
    mean_shift,
    ndcg_at_k,
    planted_dataset,
    predict,
    rank_items,
    recall_at_k,
    split,
    train,
    tsne,
    wmf_objective,
)

__all__ = [
    "Distance",
    "FactorModel",
    "InteractionDataset",
    "Similarity",
    "SplitDataset",
    "TechInferError",
    "TrainedBy",
    "__version__",
    "evaluate",
    "export_csv",
    "export_navigator_layer",
    "fold_in",
    "load_dataset",
    "mean_shift",
    "ndcg_at_k",
    "planted_dataset",
    "predict",
    "rank_items",
    "recall_at_k",
    "split",
    "train",
    "tsne",
    "wmf_objective",
]
