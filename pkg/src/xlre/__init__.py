"""Cross-lingual relation extraction with entity-marker encodings on a small numpy Transformer."""

__version__ = "0.1.0"

from .corpus import (EntityMention, RelationAnnotation, RelationInstance, RelationSchema, Sentence,
                     corpus_candidates, generate_candidates, load_corpus, split_corpus)
from .encoding import EncodedExample, InstanceEncoder, MarkerScheme, encode_example
from .evaluation import aggregate_seeds, compute_metrics, compute_rho, compute_transfer_matrix, predict_corpus
from .head import Summary, SummaryScheme
from .model import RelationModel
from .synthetic import DEFAULT_SCHEMA, LanguageSpec, generate_synthetic
from .tokenizer import Vocabulary, build_vocabulary, tokenize
from .training import TrainConfig, adam_step, fine_tune, pretrain_mlm
from .transformer import ModelConfig, init_parameters

__all__ = [
    "DEFAULT_SCHEMA", "EncodedExample", "EntityMention", "InstanceEncoder", "LanguageSpec", "MarkerScheme",
    "ModelConfig", "RelationAnnotation", "RelationInstance", "RelationModel", "RelationSchema", "Sentence",
    "Summary", "SummaryScheme", "TrainConfig", "Vocabulary", "adam_step", "aggregate_seeds", "build_vocabulary",
    "compute_metrics", "compute_rho", "compute_transfer_matrix", "corpus_candidates", "encode_example",
    "fine_tune", "generate_candidates", "generate_synthetic", "init_parameters", "load_corpus",
    "predict_corpus", "pretrain_mlm", "split_corpus", "tokenize",
]
