"""Discontinuous NER by word-pair grid tagging with a grid triplet loss."""

__version__ = "0.1.0"

from .corpus import Dataset, Entity, Sentence, compute_stats, from_json, is_discontinuous, parse_inline, to_json
from .evaluation import MetricReport, SubsetReport, evaluate, match_counts
from .grid import DecodeConfig, TagGrid, decode, encode
from .model import ModelConfig, Vocab, backward, forward, init_params, task_loss
from .trainer import TrainConfig, optimizer_step, train, violation_rate
from .triplet import MiningConfig, Source, Strategy, build_candidates, mine, select_source, triplet_loss

__all__ = [
    "Dataset", "Entity", "Sentence", "compute_stats", "from_json", "is_discontinuous", "parse_inline",
    "to_json", "MetricReport", "SubsetReport", "evaluate", "match_counts", "DecodeConfig", "TagGrid",
    "decode", "encode", "ModelConfig", "Vocab", "backward", "forward", "init_params", "task_loss",
    "TrainConfig", "optimizer_step", "train", "violation_rate", "MiningConfig", "Source", "Strategy",
    "build_candidates", "mine", "select_source", "triplet_loss",
]
