"""
ctxrep Experiment Runner
Runs the (task x context set x aggregation) matrix against a without-context
baseline, and the designed synthetic experiment behind `demo`.
"""

import hashlib
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import orjson
from loguru import logger

from ctxrep.config import get_settings
from ctxrep.engines.aggregation import aggregate_methods, aggregate_pair, aggregate_pairs
from ctxrep.engines.context_encoder import ContextEncoder, EncodedMethod, create_context_encoder
from ctxrep.engines.corpus_miner import load_labeled_pairs
from ctxrep.engines.learning import (
    DatasetSplit,
    LinearHead,
    evaluate,
    pct_improvement,
    split_dataset,
    split_pairs_by_method,
    train,
)
from ctxrep.errors import ContextRepError, SchemaError
from ctxrep.models import (
    AggregationScheme,
    CallHierarchy,
    ContextBundle,
    ContextSelection,
    EvalReport,
    ExperimentConfig,
    HeadKind,
    LabeledPair,
    MethodIdentity,
    MethodVersion,
    ResultMatrix,
    ResultRow,
    SplitBy,
    Task,
    TrainConfig,
    VersionHistory,
)
from ctxrep.services.corpus_store import load_corpus, read_json, save_matrix, write_json

BASELINE_DIR = "baseline"


# ==========================================
# TASK DATA
# ==========================================

@dataclass
class TaskData:
    """Encoded examples of one task plus the split every cell shares"""

    task: Task
    labels: np.ndarray
    split: DatasetSplit
    singles: Optional[List[EncodedMethod]] = None
    pairs: Optional[List[Tuple[EncodedMethod, EncodedMethod]]] = None
    n_labels: Optional[int] = None

    @property
    def kind(self) -> HeadKind:
        return HeadKind.SIGMOID if self.task == Task.CLONE else HeadKind.SOFTMAX

    def features(self, sel: ContextSelection, scheme: AggregationScheme) -> np.ndarray:
        if self.task == Task.CLONE:
            return aggregate_pairs(self.pairs, sel, scheme)
        return aggregate_methods(self.singles, sel, scheme)

    def swapped_train_features(self, sel: ContextSelection, scheme: AggregationScheme) -> Optional[np.ndarray]:
        if self.task != Task.CLONE or len(self.split.train) == 0:
            return None
        return np.stack([aggregate_pair(self.pairs[i][1], self.pairs[i][0], sel, scheme) for i in self.split.train])

    def labels_digest(self) -> str:
        return hashlib.sha256(self.labels.astype(np.int64).tobytes()).hexdigest()[:16]


def clone_task_data(
    pairs: List[LabeledPair],
    encodings: Dict[MethodIdentity, EncodedMethod],
    split_seed: int,
    split_by: SplitBy = SplitBy.PAIRS,
) -> TaskData:
    """Pairs in canonical operand order; split over pairs or over methods"""
    operands = [p.canonical() for p in pairs]
    missing = {str(m) for pair in operands for m in pair if m not in encodings}
    if missing:
        raise ContextRepError(f"{len(missing)} paired method(s) have no encoding, e.g. {sorted(missing)[0]}")

    if split_by == SplitBy.METHOD:
        split, dropped = split_pairs_by_method(operands, split_seed)
        logger.info(f"[MATRIX] Split by method: {split.sizes()} pairs, {dropped} cross-partition pair(s) dropped")
    else:
        split = split_dataset(len(operands), split_seed)
    return TaskData(
        task=Task.CLONE,
        labels=np.array([p.label for p in pairs], dtype=np.int64),
        split=split,
        pairs=[(encodings[a], encodings[b]) for a, b in operands],
    )


def classify_task_data(
    identities: Sequence[MethodIdentity],
    encodings: Dict[MethodIdentity, EncodedMethod],
    split_seed: int,
) -> TaskData:
    """Label = index of the method's project in sorted project order"""
    methods = sorted(identities, key=lambda i: i.sort_key)
    projects = sorted({m.project for m in methods})
    index = {project: i for i, project in enumerate(projects)}
    return TaskData(
        task=Task.CLASSIFY,
        labels=np.array([index[m.project] for m in methods], dtype=np.int64),
        split=split_dataset(len(methods), split_seed),
        singles=[encodings[m] for m in methods],
        n_labels=len(projects),
    )


# ==========================================
# RUNNER
# ==========================================

class ExperimentRunner:
    """
    Trains and evaluates every cell of a task against one shared split.
    With an output directory, each cell's model and report are persisted and
    a rerun reloads cells whose content hash is unchanged.
    """

    def __init__(
        self,
        train_config: TrainConfig,
        encoder_label: str,
        encoding_fingerprint: str,
        output_dir: Optional[Union[str, Path]] = None,
    ):
        self.train_config = train_config
        self.encoder_label = encoder_label
        self.encoding_fingerprint = encoding_fingerprint
        self.output_dir = Path(output_dir) if output_dir else None
        self.training_steps = 0

    def cell_hash(self, data: TaskData, contexts: ContextSelection, scheme: Optional[AggregationScheme]) -> str:
        payload = {
            "task": data.task.value,
            "contexts": contexts.name,
            "aggregation": scheme.value if scheme else None,
            "split": data.split.fingerprint(),
            "labels": data.labels_digest(),
            "encoding": self.encoding_fingerprint,
            "train": self.train_config.model_dump(mode="json"),
        }
        return hashlib.sha256(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS)).hexdigest()[:20]

    def cell_dir(self, task: Task, contexts: ContextSelection, scheme: Optional[AggregationScheme]) -> Optional[Path]:
        if self.output_dir is None:
            return None
        name = BASELINE_DIR if scheme is None else f"{contexts.name}__{scheme.value}"
        return self.output_dir / task.value / name

    def _load_completed(self, directory: Optional[Path], cell_hash: str) -> Optional[ResultRow]:
        if directory is None or not (directory / "report.json").exists():
            return None
        try:
            row = ResultRow.model_validate(read_json(directory / "report.json"))
        except (SchemaError, ValueError):
            return None
        return row if row.cell_hash == cell_hash and row.error is None else None

    def run_cell(
        self,
        data: TaskData,
        contexts: ContextSelection,
        scheme: Optional[AggregationScheme],
        baseline: Optional[EvalReport] = None,
    ) -> Tuple[ResultRow, Optional[LinearHead]]:
        """
        Train one head and evaluate it on the shared test partition.
        A None scheme is the baseline: code vectors only.
        """
        cell_hash = self.cell_hash(data, contexts, scheme)
        directory = self.cell_dir(data.task, contexts, scheme)
        completed = self._load_completed(directory, cell_hash)
        label = f"{data.task.value}/{contexts.name}/{scheme.value if scheme else 'baseline'}"
        if completed is not None:
            logger.info(f"[MATRIX] {label}: reusing completed cell {cell_hash}")
            return completed, None

        row = ResultRow(
            task=data.task,
            encoder=self.encoder_label,
            contexts=contexts.name,
            aggregation=scheme,
            split_hash=data.split.fingerprint(),
            cell_hash=cell_hash,
        )
        effective = scheme or AggregationScheme.CONCAT
        try:
            features = data.features(contexts, effective)
            augment = data.swapped_train_features(contexts, effective) if self.train_config.swap_augment else None
            head = train(features, data.labels, data.split, self.train_config, data.kind, data.n_labels, augment)
            self.training_steps += head.metadata["steps"]
            test = data.split.test
            row.report = evaluate(head, features[test], data.labels[test], baseline)
            head.metadata.update({
                "task": data.task.value,
                "contexts": contexts.name,
                "aggregation": effective.value,
                "feature_dimension": int(features.shape[1]),
                "encoder": self.encoder_label,
            })
        except Exception as e:
            logger.warning(f"[MATRIX] {label} failed: {e}")
            row.error = f"{type(e).__name__}: {e}"
            head = None

        if directory is not None:
            if head is not None:
                write_json(directory / "model.json", head.to_dict())
            write_json(directory / "report.json", row.model_dump(mode="json"))
        if row.report is not None:
            logger.info(f"[MATRIX] {label}: F1={row.report.f1:.3f} Acc={row.report.accuracy:.3f}")
        return row, head

    def run_task(self, data: TaskData, cells: Sequence[Tuple[ContextSelection, AggregationScheme]]) -> List[ResultRow]:
        """Baseline first, then every cell against the same split"""
        baseline_row, _ = self.run_cell(data, ContextSelection(), None)
        rows = [baseline_row]
        for contexts, scheme in cells:
            row, _ = self.run_cell(data, contexts, scheme, baseline_row.report)
            rows.append(row)
        return rows


def create_experiment_runner(
    train_config: TrainConfig,
    encoder: ContextEncoder,
    output_dir: Optional[Union[str, Path]] = None,
) -> ExperimentRunner:
    """Factory function to create an ExperimentRunner"""
    return ExperimentRunner(train_config, encoder.label, encoder.fingerprint(), output_dir)


def run_matrix(cfg: ExperimentConfig) -> ResultMatrix:
    """
    Execute the configured matrix.

    Args:
        cfg: corpus, pairs, encoder settings, tasks, grid, training, output

    Returns:
        ResultMatrix with one baseline row per task first; also saved as
        matrix.json under the output directory
    """
    corpus = load_corpus(cfg.corpus)
    encoder = create_context_encoder(
        corpus,
        dimension=cfg.encoder.dimension,
        seed=cfg.encoder.seed,
        max_tokens=cfg.encoder.budget,
        external_path=cfg.encoder.external,
    )
    encodings = encoder.encode_corpus(corpus)
    output_dir = Path(cfg.output_dir) if cfg.output_dir else get_settings().output_root_path
    runner = create_experiment_runner(cfg.train, encoder, output_dir)

    matrix = ResultMatrix(metadata={
        "encoder": encoder.label,
        "dimension": cfg.encoder.dimension,
        "budget": cfg.encoder.budget,
        "split_seed": cfg.split_seed,
        "split_by": cfg.split_by.value,
        "methods": len(corpus),
    })
    for task in cfg.tasks:
        if task == Task.CLONE:
            if not cfg.pairs:
                raise ContextRepError("the clone task needs a pairs file")
            pairs = load_labeled_pairs(cfg.pairs, known=set(encodings))
            data = clone_task_data(pairs, encodings, cfg.split_seed, cfg.split_by)
        else:
            data = classify_task_data([b.identity for b in corpus], encodings, cfg.split_seed)
        matrix.metadata[f"{task.value}_split"] = list(data.split.sizes())
        cells = [(cell.contexts, cell.aggregation) for cell in cfg.grid(task)]
        logger.info(f"[MATRIX] {task.value}: baseline + {len(cells)} cell(s)")
        matrix.rows.extend(runner.run_task(data, cells))

    matrix.training_steps = runner.training_steps
    save_matrix(output_dir, matrix)
    logger.info(f"[MATRIX] Done: {len(matrix.rows)} row(s), {matrix.training_steps} training step(s) this run")
    return matrix


# ==========================================
# DESIGNED EXPERIMENT
# ==========================================

DEMO_SEEDS = 5
DEMO_TRAIN = TrainConfig(learning_rate=1.0, epochs=100, batch_size=32)
DEMO_HEAD_TIME = 1_700_000_000
_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _designed_vocabulary(rng: np.random.Generator, size: int) -> List[str]:
    """Distinct all-lowercase words, so each one stays a single subtoken"""
    syllables = [c + v for c in _CONSONANTS for v in _VOWELS]
    codes = rng.choice(len(syllables) ** 3, size=size, replace=False)
    n = len(syllables)
    return [syllables[c // (n * n)] + syllables[(c // n) % n] + syllables[c % n] for c in codes]


def _method_text(words: Sequence[str]) -> str:
    return "void run() { " + " ".join(f"{w};" for w in words) + " }"


def designed_corpus(
    seed: int,
    informativeness: float = 1.0,
    n_pairs: int = 1000,
    current_words: int = 32,
    ancestor_words: int = 64,
) -> Tuple[List[ContextBundle], List[LabeledPair]]:
    """
    Synthetic pairs whose histories carry the clone signal.

    Half of the pairs are positive. Half of those are "easy" exact clones
    (identical current versions, which the code vector alone separates); the
    rest have unrelated current versions. With probability `informativeness`
    a positive pair's two methods share one ancestral version; every other
    method gets its own.
    """
    rng = np.random.default_rng(seed)
    vocabulary = _designed_vocabulary(rng, 4000)

    def words(count: int) -> List[str]:
        return [vocabulary[i] for i in rng.integers(0, len(vocabulary), size=count)]

    def bundle(pair_index: int, side: str, current: List[str], ancestor: List[str]) -> ContextBundle:
        days = int(rng.integers(17, 6335))
        identity = MethodIdentity(
            project="designed",
            file_path=f"src/main/java/designed/Pair{pair_index}.java",
            qualified_name=f"Pair{pair_index}.{side}",
            signature="",
        )

        def stamp(version: str) -> str:
            return hashlib.sha1(f"{seed}:{pair_index}:{side}:{version}".encode()).hexdigest()

        versions = [
            MethodVersion(commit_hash=stamp("current"), author_time=DEMO_HEAD_TIME - 3600, source_text=_method_text(current)),
            MethodVersion(commit_hash=stamp("ancestor"), author_time=DEMO_HEAD_TIME - days * 86400, source_text=_method_text(ancestor)),
        ]
        history = VersionHistory(identity=identity, versions=versions, lifetime_days=days)
        return ContextBundle(history=history, calls=CallHierarchy(), days=days)

    corpus: List[ContextBundle] = []
    pairs: List[LabeledPair] = []
    for index in range(n_pairs):
        positive = index % 2 == 0
        easy = positive and index % 4 == 0
        left = words(current_words)
        right = list(left) if easy else words(current_words)
        if positive and rng.random() < informativeness:
            ancestor = words(ancestor_words)
            ancestors = (ancestor, ancestor)
        else:
            ancestors = (words(ancestor_words), words(ancestor_words))

        a = bundle(index, "left", left, ancestors[0])
        b = bundle(index, "right", right, ancestors[1])
        corpus.extend([a, b])
        pairs.append(LabeledPair(
            a=a.identity,
            b=b.identity,
            label=int(positive),
            confidence_weights=(1.0, 0.0, 0.0),
        ))
    return corpus, pairs


def _median_report(reports: List[EvalReport]) -> EvalReport:
    return EvalReport(
        precision=statistics.median(r.precision for r in reports),
        recall=statistics.median(r.recall for r in reports),
        f1=statistics.median(r.f1 for r in reports),
        accuracy=statistics.median(r.accuracy for r in reports),
        support=int(statistics.median(r.support for r in reports)),
    )


def run_designed_experiment(
    seed: int = 7,
    informativeness: float = 1.0,
    n_pairs: int = 1000,
    seeds: int = DEMO_SEEDS,
    train_config: Optional[TrainConfig] = None,
    dimension: Optional[int] = None,
) -> ResultMatrix:
    """
    Baseline vs. version-history concatenation on the designed corpus,
    median over `seeds` consecutive seeds starting at `seed`.
    """
    settings = get_settings()
    dimension = dimension or settings.dimension
    base_config = train_config or DEMO_TRAIN
    history = ContextSelection(use_history=True)

    baseline_reports: List[EvalReport] = []
    history_reports: List[EvalReport] = []
    for run_seed in range(seed, seed + seeds):
        corpus, pairs = designed_corpus(run_seed, informativeness, n_pairs)
        encoder = create_context_encoder(corpus, dimension=dimension, seed=run_seed, max_tokens=settings.token_budget)
        encodings = encoder.encode_corpus(corpus)
        data = clone_task_data(pairs, encodings, run_seed)
        runner = ExperimentRunner(base_config.model_copy(update={"seed": run_seed}), encoder.label, encoder.fingerprint())
        baseline_row, _ = runner.run_cell(data, ContextSelection(), None)
        history_row, _ = runner.run_cell(data, history, AggregationScheme.CONCAT, baseline_row.report)
        for row in (baseline_row, history_row):
            if row.report is None:
                raise ContextRepError(f"designed experiment failed at seed {run_seed}: {row.error}")
        baseline_reports.append(baseline_row.report)
        history_reports.append(history_row.report)
        logger.info(
            f"[DEMO] seed {run_seed}: baseline F1={baseline_row.report.f1:.3f} VH F1={history_row.report.f1:.3f}"
        )

    baseline = _median_report(baseline_reports)
    with_history = _median_report(history_reports)
    with_history.pct_improvement = pct_improvement(with_history.f1, baseline.f1)

    matrix = ResultMatrix(
        rows=[
            ResultRow(task=Task.CLONE, contexts="none", report=baseline),
            ResultRow(task=Task.CLONE, contexts=history.name, aggregation=AggregationScheme.CONCAT, report=with_history),
        ],
        metadata={
            "experiment": "designed",
            "seeds": list(range(seed, seed + seeds)),
            "informativeness": informativeness,
            "pairs": n_pairs,
            "baseline_f1": [r.f1 for r in baseline_reports],
            "history_f1": [r.f1 for r in history_reports],
            "delta_f1": with_history.f1 - baseline.f1,
        },
    )
    logger.info(f"[DEMO] median F1 baseline={baseline.f1:.3f} VH={with_history.f1:.3f}")
    return matrix
