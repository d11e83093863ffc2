from terranp.model.attention import bq_attention, global_attention_masked
from terranp.model.sampling import CellSample, sample_context_target
from terranp.model.scnp import (
    ContextSet,
    LatentDist,
    PredictiveField,
    SemanticNP,
    TargetSet,
)

__all__ = (
    "CellSample",
    "ContextSet",
    "LatentDist",
    "PredictiveField",
    "SemanticNP",
    "TargetSet",
    "bq_attention",
    "global_attention_masked",
    "sample_context_target",
)
