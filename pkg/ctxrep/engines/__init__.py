"""ctxrep Engines Module - mining, encoding, aggregation and learning"""

from ctxrep.engines.java_parser import MethodSpan, ParseResult, parse_java, extract_methods
from ctxrep.engines.corpus_miner import RepositoryMiner, create_repository_miner, mine_repositories, load_labeled_pairs
from ctxrep.engines.fixture_engine import SyntheticRepository, synth_fixture, expected_histories
from ctxrep.engines.stats_engine import StatsEngine, create_stats_engine
from ctxrep.engines.context_encoder import ContextEncoder, EncodedMethod, create_context_encoder
from ctxrep.engines.learning import LinearHead, train, evaluate, split_dataset
from ctxrep.engines.experiment_runner import ExperimentRunner, create_experiment_runner, run_matrix, run_designed_experiment

__all__ = [
    "MethodSpan",
    "ParseResult",
    "parse_java",
    "extract_methods",
    "RepositoryMiner",
    "create_repository_miner",
    "mine_repositories",
    "load_labeled_pairs",
    "SyntheticRepository",
    "synth_fixture",
    "expected_histories",
    "StatsEngine",
    "create_stats_engine",
    "ContextEncoder",
    "EncodedMethod",
    "create_context_encoder",
    "LinearHead",
    "train",
    "evaluate",
    "split_dataset",
    "ExperimentRunner",
    "create_experiment_runner",
    "run_matrix",
    "run_designed_experiment",
]
