"""
ctxrep - Main Entry Point
Command-line surface for mining, encoding, training and reporting
"""

import functools
import hashlib
import sys
from pathlib import Path
from typing import Optional

import click
from loguru import logger
from pydantic import ValidationError

from ctxrep import __version__
from ctxrep.config import get_settings
from ctxrep.engines.context_encoder import create_context_encoder, import_external_embeddings, save_encodings
from ctxrep.engines.corpus_miner import load_labeled_pairs, mine_repositories
from ctxrep.engines.experiment_runner import (
    ExperimentRunner,
    classify_task_data,
    clone_task_data,
    run_designed_experiment,
    run_matrix,
)
from ctxrep.engines.fixture_engine import synth_fixture
from ctxrep.engines.stats_engine import create_stats_engine
from ctxrep.errors import ContextRepError
from ctxrep.models import (
    AggregationScheme,
    ContextSelection,
    ExperimentConfig,
    FixtureSpec,
    ResultMatrix,
    ScenarioConfig,
    SplitBy,
    Task,
    TrainConfig,
)
from ctxrep.services.corpus_store import load_corpus, load_matrix, read_json, save_corpus, save_matrix, write_json
from ctxrep.services.report_service import render_stats, render_table

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)


def configure_logging(level: str) -> None:
    """One stderr sink, so stdout carries only command output"""
    logger.remove()
    logger.add(sys.stderr, colorize=True, format=LOG_FORMAT, level=level.upper())


def handle_errors(command):
    """Turn toolkit and validation errors into one-line CLI failures"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ContextRepError as e:
            logger.debug(f"[CLI] {type(e).__name__}: {e}")
            raise click.ClickException(f"{type(e).__name__}: {e}")
        except ValidationError as e:
            raise click.ClickException(f"invalid input: {str(e).splitlines()[0]}")

    return wrapper


FORMAT_OPTION = click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default="text", show_default=True)


def create_cli() -> click.Group:
    """Build the ctxrep command group"""
    settings = get_settings()

    @click.group()
    @click.version_option(__version__, prog_name="ctxrep")
    @click.option("--log-level", default=settings.log_level, show_default=True, help="loguru level")
    def cli(log_level: str):
        """Version-history context for code representations."""
        configure_logging(log_level)

    # ==========================================
    # Corpus
    # ==========================================

    @cli.command()
    @click.option("--repo", "repos", multiple=True, required=True, type=click.Path(), help="Repository to mine (repeatable)")
    @click.option("--out", required=True, type=click.Path(dir_okay=False), help="Corpus JSONL")
    @click.option("--project", "projects", multiple=True, help="Project name per --repo (default: directory name)")
    @click.option("--workers", type=int, default=settings.mine_workers, show_default=True)
    @handle_errors
    def mine(repos, out, projects, workers):
        """Mine method histories and contexts from git repositories."""
        if projects and len(projects) != len(repos):
            raise click.BadParameter("give one --project per --repo", param_hint="--project")
        bundles = mine_repositories(list(repos), list(projects) or None, workers)
        count = save_corpus(out, bundles)
        click.echo(f"mined {count} method(s) into {out}")

    @cli.command()
    @click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
    @FORMAT_OPTION
    @handle_errors
    def stats(corpus, fmt):
        """Dataset statistics per project."""
        click.echo(render_stats(create_stats_engine().compute_corpus_stats(load_corpus(corpus)), fmt), nl=False)

    @cli.command()
    @click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
    @click.option("--seed", type=int, default=settings.seed, show_default=True)
    @click.option("--out", required=True, type=click.Path(file_okay=False))
    @handle_errors
    def fixture(spec_path, seed, out):
        """Build a synthetic git repository from a fixture spec."""
        spec = FixtureSpec.model_validate(read_json(spec_path))
        repository = synth_fixture(spec, seed, out)
        click.echo(f"created {repository.path} with {len(repository.commits)} commit(s)")

    # ==========================================
    # Encoding and training
    # ==========================================

    @cli.command()
    @click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
    @click.option("--dim", type=int, default=settings.dimension, show_default=True)
    @click.option("--budget", type=click.IntRange(min=1), default=settings.token_budget, show_default=True)
    @click.option("--seed", type=int, default=settings.seed, show_default=True)
    @click.option("--out", required=True, type=click.Path(dir_okay=False))
    @click.option("--external", type=click.Path(exists=True, dir_okay=False), help="Embeddings JSONL to import")
    @handle_errors
    def encode(corpus, dim, budget, seed, out, external):
        """Encode every method's five representations."""
        bundles = load_corpus(corpus)
        encoder = create_context_encoder(bundles, dimension=dim, seed=seed, max_tokens=budget, external_path=external)
        count = save_encodings(out, encoder.encode_corpus(bundles))
        click.echo(f"encoded {count} method(s) into {out} ({encoder.label})")

    @cli.command("train")
    @click.option("--task", type=click.Choice([t.value for t in Task]), required=True)
    @click.option("--scenario", type=click.Choice([s.value for s in AggregationScheme]), default="concat", show_default=True)
    @click.option("--contexts", default="vh", show_default=True, help="none, vh, ch, vh+ch, vh+days, vh+ch+days")
    @click.option("--enc", required=True, type=click.Path(exists=True, dir_okay=False), help="Encodings JSONL")
    @click.option("--pairs", type=click.Path(exists=True, dir_okay=False), help="Labeled pairs (clone task)")
    @click.option("--corpus", type=click.Path(exists=True, dir_okay=False), help="Restrict classification to this corpus")
    @click.option("--seed", type=int, default=settings.seed, show_default=True)
    @click.option("--out", required=True, type=click.Path(dir_okay=False), help="Model JSON")
    @click.option("--split-by", type=click.Choice([s.value for s in SplitBy]), default="pairs", show_default=True)
    @click.option("--swap-augment", is_flag=True, help="Also train on swapped pair operands")
    @click.option("--epochs", type=int, default=settings.epochs, show_default=True)
    @click.option("--learning-rate", type=float, default=settings.learning_rate, show_default=True)
    @click.option("--batch-size", type=int, default=settings.batch_size, show_default=True)
    @handle_errors
    def train_command(task, scenario, contexts, enc, pairs, corpus, seed, out, split_by, swap_augment, epochs, learning_rate, batch_size):
        """Train one head and report it against the code-only baseline."""
        try:
            selection = ContextSelection.parse(contexts)
        except ValueError as e:
            raise click.BadParameter(str(e), param_hint="--contexts")
        scenario_config = ScenarioConfig(task=Task(task), contexts=selection, aggregation=AggregationScheme(scenario))
        train_config = TrainConfig(
            learning_rate=learning_rate,
            epochs=epochs,
            batch_size=batch_size,
            seed=seed,
            swap_augment=swap_augment,
        )

        encodings = import_external_embeddings(enc)
        if scenario_config.task == Task.CLONE:
            if not pairs:
                raise click.BadParameter("the clone task needs --pairs", param_hint="--pairs")
            labeled = load_labeled_pairs(pairs, known=set(encodings))
            data = clone_task_data(labeled, encodings, seed, SplitBy(split_by))
        else:
            identities = list(encodings)
            if corpus:
                keep = {b.identity for b in load_corpus(corpus)}
                identities = [i for i in identities if i in keep]
            data = classify_task_data(identities, encodings, seed)

        fingerprint = hashlib.sha256(Path(enc).read_bytes()).hexdigest()[:16]
        runner = ExperimentRunner(train_config, Path(enc).stem, fingerprint)
        baseline, head = runner.run_cell(data, ContextSelection(), None)
        rows = [baseline]
        if not selection.is_baseline:
            row, head = runner.run_cell(data, selection, scenario_config.aggregation, baseline.report)
            rows.append(row)
        if head is None:
            raise ContextRepError(f"training failed: {rows[-1].error}")
        write_json(out, head.to_dict())
        click.echo(render_table(ResultMatrix(rows=rows), "text"), nl=False)

    # ==========================================
    # Experiments and reports
    # ==========================================

    @cli.command()
    @click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
    @FORMAT_OPTION
    @handle_errors
    def run(config_path, fmt):
        """Run an experiment matrix from a JSON config."""
        config = ExperimentConfig.model_validate(read_json(config_path))
        matrix = run_matrix(config)
        click.echo(render_table(matrix, fmt), nl=False)

    @cli.command()
    @click.option("--matrix", "matrix_path", required=True, type=click.Path(exists=True))
    @FORMAT_OPTION
    @handle_errors
    def report(matrix_path, fmt):
        """Render a saved result matrix."""
        click.echo(render_table(load_matrix(matrix_path), fmt), nl=False)

    @cli.command()
    @click.option("--seed", type=int, default=settings.seed, show_default=True)
    @click.option("--informativeness", type=click.FloatRange(0.0, 1.0), default=1.0, show_default=True)
    @click.option("--pairs", "n_pairs", type=click.IntRange(min=200), default=1000, show_default=True)
    @click.option("--out", type=click.Path(), help="Also save the matrix here")
    @FORMAT_OPTION
    @handle_errors
    def demo(seed, informativeness, n_pairs, out, fmt):
        """Designed experiment: does version history beat the code-only baseline?"""
        matrix = run_designed_experiment(seed=seed, informativeness=informativeness, n_pairs=n_pairs)
        if out:
            save_matrix(out, matrix)
        click.echo(render_table(matrix, fmt), nl=False)
        click.echo(f"delta F1 (VH - baseline): {matrix.metadata['delta_f1']:+.3f}")

    return cli


cli = create_cli()


def main(argv: Optional[list] = None) -> None:
    cli.main(args=argv, prog_name="ctxrep")


if __name__ == "__main__":
    main()
