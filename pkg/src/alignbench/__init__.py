"""Attention alignment score functions, attention mechanisms and a desk-scale benchmark grid."""

from .alignment import ALIGNMENT_NAMES, AlignmentSpec, Kind, init_params, score
from .attention import (CrossAttentionOutput, EncoderBlockParams, MacScoreParams, MultiHeadConfig,
                        cross_attend, encoder_block, mac_score, self_attend)
from .autodiff import Graph, reverse_sweep
from .errors import (AlignBenchError, ConfigError, ContractError, DimensionError,
                     UnsupportedCombinationError)
from .metrics import QAResult, RankingTable, anls, levenshtein, recall_at_k, rsum, vqa_soft_score
from .numeric import layer_norm, matmul, relu, row_softmax
from .models import (CountingModel, PointerModel, RetrievalModel, counting_forward, pointer_forward,
                     scan_similarity, triplet_loss)
from .optim import AdamState, adam_step
from .rng import Rng64, rng_gaussian
from .tasks import (CountingConfig, PointerConfig, RetrievalConfig, gen_counting, gen_pointer,
                    gen_retrieval)
from .training import load_checkpoint, save_checkpoint, train
from .bench import GridConfig, RunRecord, emit_report, parse_config, run_grid, run_single

__all__ = [
    "ALIGNMENT_NAMES",
    "AdamState",
    "AlignBenchError",
    "AlignmentSpec",
    "ConfigError",
    "ContractError",
    "CountingConfig",
    "CountingModel",
    "CrossAttentionOutput",
    "DimensionError",
    "EncoderBlockParams",
    "Graph",
    "GridConfig",
    "Kind",
    "MacScoreParams",
    "MultiHeadConfig",
    "PointerConfig",
    "PointerModel",
    "QAResult",
    "RankingTable",
    "RetrievalConfig",
    "RetrievalModel",
    "Rng64",
    "RunRecord",
    "UnsupportedCombinationError",
    "adam_step",
    "anls",
    "counting_forward",
    "cross_attend",
    "emit_report",
    "encoder_block",
    "gen_counting",
    "gen_pointer",
    "gen_retrieval",
    "init_params",
    "layer_norm",
    "levenshtein",
    "load_checkpoint",
    "mac_score",
    "matmul",
    "parse_config",
    "pointer_forward",
    "recall_at_k",
    "relu",
    "reverse_sweep",
    "rng_gaussian",
    "row_softmax",
    "rsum",
    "run_grid",
    "run_single",
    "save_checkpoint",
    "scan_similarity",
    "score",
    "self_attend",
    "train",
    "triplet_loss",
    "vqa_soft_score",
]

__version__ = "0.1.0"
