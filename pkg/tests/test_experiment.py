"""
ctxrep Experiment Tests
Result matrix, cell persistence and the designed experiment
"""

import numpy as np
import orjson
import pytest

from ctxrep.engines.context_encoder import create_context_encoder
from ctxrep.engines.experiment_runner import (
    ExperimentRunner,
    classify_task_data,
    clone_task_data,
    designed_corpus,
    run_designed_experiment,
    run_matrix,
)
from ctxrep.errors import ContextRepError
from ctxrep.models import (
    AggregationScheme,
    ContextSelection,
    EncoderSettings,
    ExperimentConfig,
    SplitBy,
    Task,
    TrainConfig,
)
from ctxrep.services.corpus_store import load_matrix, save_corpus

FAST_TRAIN = TrainConfig(learning_rate=0.5, epochs=3, batch_size=16)


def write_pairs(path, pairs):
    lines = []
    for pair in pairs:
        judgment = {"high_yes": 3} if pair.label else {"high_no": 3}
        lines.append(orjson.dumps({"a": pair.a.locator(), "b": pair.b.locator(), **judgment}))
    path.write_bytes(b"\n".join(lines) + b"\n")
    return path


@pytest.fixture
def designed_files(tmp_path):
    corpus, pairs = designed_corpus(1, 1.0, 60)
    save_corpus(tmp_path / "corpus.jsonl", corpus)
    write_pairs(tmp_path / "pairs.jsonl", pairs)
    return tmp_path / "corpus.jsonl", tmp_path / "pairs.jsonl"


class TestDesignedCorpus:
    """Tests for designed_corpus"""

    def test_shape(self):
        """Should build two methods per pair with alternating labels"""
        corpus, pairs = designed_corpus(3, 1.0, 40)
        assert len(corpus) == 80
        assert [p.label for p in pairs[:4]] == [1, 0, 1, 0]
        assert len({b.identity for b in corpus}) == 80

    def test_informative_positives_share_ancestor(self):
        """Should give both methods of a positive pair the same ancestor"""
        corpus, pairs = designed_corpus(3, 1.0, 20)
        by_id = {b.identity: b for b in corpus}
        for pair in pairs:
            a, b = by_id[pair.a], by_id[pair.b]
            shared = a.history.versions[1].source_text == b.history.versions[1].source_text
            assert shared == bool(pair.label)

    def test_null_informativeness(self):
        """Should share no ancestors when informativeness is zero"""
        corpus, pairs = designed_corpus(3, 0.0, 20)
        by_id = {b.identity: b for b in corpus}
        for pair in pairs:
            assert by_id[pair.a].history.versions[1].source_text != by_id[pair.b].history.versions[1].source_text

    def test_easy_pairs_are_exact_clones(self):
        """Should give every fourth pair identical current versions"""
        corpus, pairs = designed_corpus(3, 1.0, 8)
        by_id = {b.identity: b for b in corpus}
        easy = pairs[0]
        left = by_id[easy.a].current_text.split()
        right = by_id[easy.b].current_text.split()
        assert left == right
        assert by_id[pairs[2].a].current_text != by_id[pairs[2].b].current_text

    def test_deterministic(self):
        """Should rebuild the same corpus for the same seed"""
        assert designed_corpus(5, 0.5, 12) == designed_corpus(5, 0.5, 12)


class TestRunMatrix:
    """Tests for run_matrix"""

    def test_clone_matrix(self, designed_files, tmp_path):
        """Should produce a baseline plus fifteen cells on one shared split"""
        corpus, pairs = designed_files
        cfg = ExperimentConfig(
            corpus=str(corpus),
            pairs=str(pairs),
            encoder=EncoderSettings(dimension=32),
            tasks=[Task.CLONE],
            train=FAST_TRAIN,
            output_dir=str(tmp_path / "out"),
        )
        matrix = run_matrix(cfg)
        assert len(matrix.rows) == 16
        assert matrix.rows[0].is_baseline
        assert all(row.error is None for row in matrix.rows)
        assert len({row.split_hash for row in matrix.rows}) == 1
        assert matrix.metadata["clone_split"] == [48, 6, 6]
        assert (tmp_path / "out" / "clone" / "baseline" / "model.json").exists()
        assert (tmp_path / "out" / "clone" / "vh+ch__diff_concat" / "report.json").exists()
        assert load_matrix(tmp_path / "out").rows == matrix.rows

    def test_rerun_reuses_cells(self, designed_files, tmp_path):
        """Should perform no training steps when nothing changed"""
        corpus, pairs = designed_files
        cfg = ExperimentConfig(
            corpus=str(corpus),
            pairs=str(pairs),
            encoder=EncoderSettings(dimension=32),
            tasks=[Task.CLONE],
            context_sets=["vh"],
            train=FAST_TRAIN,
            output_dir=str(tmp_path / "out"),
        )
        first = run_matrix(cfg)
        second = run_matrix(cfg)
        assert first.training_steps > 0
        assert second.training_steps == 0
        assert [r.report for r in second.rows] == [r.report for r in first.rows]

    def test_changed_training_retrains(self, designed_files, tmp_path):
        """Should retrain cells when the training config changes"""
        corpus, pairs = designed_files
        cfg = ExperimentConfig(
            corpus=str(corpus),
            pairs=str(pairs),
            encoder=EncoderSettings(dimension=32),
            tasks=[Task.CLONE],
            context_sets=["vh"],
            aggregations=[AggregationScheme.CONCAT],
            train=FAST_TRAIN,
            output_dir=str(tmp_path / "out"),
        )
        run_matrix(cfg)
        changed = cfg.model_copy(update={"train": FAST_TRAIN.model_copy(update={"epochs": 4})})
        assert run_matrix(changed).training_steps > 0

    def test_classify_matrix(self, two_project_corpus, tmp_path):
        """Should produce a baseline plus ten cells without diff_concat"""
        save_corpus(tmp_path / "corpus.jsonl", two_project_corpus)
        cfg = ExperimentConfig(
            corpus=str(tmp_path / "corpus.jsonl"),
            encoder=EncoderSettings(dimension=16),
            tasks=[Task.CLASSIFY],
            train=FAST_TRAIN,
            output_dir=str(tmp_path / "out"),
        )
        matrix = run_matrix(cfg)
        assert len(matrix.rows) == 11
        assert AggregationScheme.DIFF_CONCAT not in {r.aggregation for r in matrix.rows}
        assert all(r.report is not None for r in matrix.rows)

    def test_single_project_records_errors(self, make_bundle, tmp_path):
        """Should record DegenerateLabels in every row instead of aborting"""
        corpus = [make_bundle("solo", f"Only.m{i}", [f"int m{i}() {{ return {i}; }}"]) for i in range(12)]
        save_corpus(tmp_path / "corpus.jsonl", corpus)
        cfg = ExperimentConfig(
            corpus=str(tmp_path / "corpus.jsonl"),
            encoder=EncoderSettings(dimension=16),
            tasks=[Task.CLASSIFY],
            train=FAST_TRAIN,
            output_dir=str(tmp_path / "out"),
        )
        matrix = run_matrix(cfg)
        assert len(matrix.rows) == 11
        assert all(r.error and r.error.startswith("DegenerateLabels") for r in matrix.rows)

    def test_empty_grid(self, two_project_corpus, tmp_path):
        """Should run the baseline alone when no context set is configured"""
        save_corpus(tmp_path / "corpus.jsonl", two_project_corpus)
        cfg = ExperimentConfig(
            corpus=str(tmp_path / "corpus.jsonl"),
            encoder=EncoderSettings(dimension=16),
            tasks=[Task.CLASSIFY],
            context_sets=[],
            train=FAST_TRAIN,
            output_dir=str(tmp_path / "out"),
        )
        matrix = run_matrix(cfg)
        assert len(matrix.rows) == 1
        assert matrix.rows[0].is_baseline

    def test_default_output_root(self, two_project_corpus, tmp_path):
        """Should write under CTXREP_OUTPUT_ROOT when no output_dir is set"""
        save_corpus(tmp_path / "corpus.jsonl", two_project_corpus)
        cfg = ExperimentConfig(
            corpus=str(tmp_path / "corpus.jsonl"),
            encoder=EncoderSettings(dimension=16),
            tasks=[Task.CLASSIFY],
            context_sets=[],
            train=FAST_TRAIN,
        )
        run_matrix(cfg)
        assert (tmp_path / "runs" / "matrix.json").exists()

    def test_clone_without_pairs(self, two_project_corpus, tmp_path):
        """Should refuse the clone task without a pairs file"""
        save_corpus(tmp_path / "corpus.jsonl", two_project_corpus)
        cfg = ExperimentConfig(corpus=str(tmp_path / "corpus.jsonl"), tasks=[Task.CLONE], train=FAST_TRAIN)
        with pytest.raises(ContextRepError, match="pairs"):
            run_matrix(cfg)


class TestRunner:
    """Tests for ExperimentRunner cells"""

    def test_split_by_method(self):
        """Should keep only same-partition pairs when splitting by method"""
        corpus, pairs = designed_corpus(2, 1.0, 60)
        encodings = create_context_encoder(corpus, dimension=16).encode_corpus(corpus)
        data = clone_task_data(pairs, encodings, 7, SplitBy.METHOD)
        assert sum(data.split.sizes()) <= len(pairs)

    def test_swap_augmentation_doubles_training(self):
        """Should add one swapped row per training pair"""
        corpus, pairs = designed_corpus(2, 1.0, 30)
        encodings = create_context_encoder(corpus, dimension=16).encode_corpus(corpus)
        data = clone_task_data(pairs, encodings, 7)
        runner = ExperimentRunner(FAST_TRAIN.model_copy(update={"swap_augment": True}), "hashed-tfidf", "x")
        _, head = runner.run_cell(data, ContextSelection(use_history=True), AggregationScheme.DIFF_CONCAT)
        assert head.metadata["train_size"] == 2 * len(data.split.train)

    def test_classification_labels_follow_project_order(self, two_project_corpus):
        """Should number projects in sorted order"""
        encodings = create_context_encoder(two_project_corpus, dimension=16).encode_corpus(two_project_corpus)
        data = classify_task_data([b.identity for b in two_project_corpus], encodings, 7)
        assert data.n_labels == 2
        assert np.bincount(data.labels).tolist() == [20, 20]

    def test_cell_hashes_are_distinct(self):
        """Should hash every cell of the grid differently"""
        corpus, pairs = designed_corpus(2, 1.0, 20)
        encodings = create_context_encoder(corpus, dimension=16).encode_corpus(corpus)
        data = clone_task_data(pairs, encodings, 7)
        runner = ExperimentRunner(FAST_TRAIN, "hashed-tfidf", "fingerprint")
        cells = [(ContextSelection(), None)] + [
            (ContextSelection.parse(name), scheme)
            for name in ("vh", "ch", "vh+days")
            for scheme in AggregationScheme
        ]
        assert len({runner.cell_hash(data, sel, scheme) for sel, scheme in cells}) == len(cells)

    def test_encoding_change_changes_hash(self):
        """Should rehash cells when the encodings change"""
        corpus, pairs = designed_corpus(2, 1.0, 20)
        encodings = create_context_encoder(corpus, dimension=16).encode_corpus(corpus)
        data = clone_task_data(pairs, encodings, 7)
        first = ExperimentRunner(FAST_TRAIN, "hashed-tfidf", "one").cell_hash(data, ContextSelection(), None)
        second = ExperimentRunner(FAST_TRAIN, "hashed-tfidf", "two").cell_hash(data, ContextSelection(), None)
        assert first != second


@pytest.mark.slow
class TestDesignedExperiment:
    """Tests for run_designed_experiment"""

    @pytest.mark.parametrize("seed", [7, 20])
    def test_informative_history_helps(self, seed):
        """Should beat the baseline median F1 by at least 0.05 when histories carry the clone signal"""
        matrix = run_designed_experiment(seed=seed, informativeness=1.0)
        assert len(matrix.rows) == 2
        assert len(matrix.metadata["seeds"]) == 5
        assert matrix.metadata["delta_f1"] >= 0.05

    @pytest.mark.parametrize("seed", [1, 7, 20, 100])
    def test_uninformative_history_is_neutral(self, seed):
        """Should stay within 0.05 of the baseline when histories carry no signal"""
        matrix = run_designed_experiment(seed=seed, informativeness=0.0)
        assert abs(matrix.metadata["delta_f1"]) <= 0.05

    def test_deterministic(self):
        """Should reproduce the same medians for the same seed"""
        cfg = TrainConfig(learning_rate=1.0, epochs=5, batch_size=32)
        first = run_designed_experiment(seed=2, n_pairs=200, seeds=1, train_config=cfg, dimension=32)
        second = run_designed_experiment(seed=2, n_pairs=200, seeds=1, train_config=cfg, dimension=32)
        assert first.metadata == second.metadata
        assert first.rows == second.rows
