"""
ctxrep Stats Engine
Computes dataset statistics from a mined corpus.
Provides: methods, versions per method, changed lines per version, lifetime days.
"""

from collections import defaultdict
from typing import Dict, List, Optional

from loguru import logger

from ctxrep.errors import EmptyCorpus
from ctxrep.models import ContextBundle, CorpusStats, ProjectStatsRow

TOTAL_ROW = "Total"


class StatsEngine:
    """
    The Stats Engine provides derived views of a corpus.
    "The corpus is data. Statistics are views."
    """

    def __init__(self, total_label: str = TOTAL_ROW):
        self.total_label = total_label

    def compute_corpus_stats(self, corpus: List[ContextBundle]) -> CorpusStats:
        """
        Per-project rows plus one row over the whole corpus.

        Args:
            corpus: mined bundles from one or more projects

        Returns:
            CorpusStats with rows sorted by project name
        """
        if not corpus:
            raise EmptyCorpus("corpus statistics need at least one method")

        by_project: Dict[str, List[ContextBundle]] = defaultdict(list)
        for bundle in corpus:
            by_project[bundle.project].append(bundle)

        rows = [self.compute_project_row(project, by_project[project]) for project in sorted(by_project)]
        total = self.compute_project_row(self.total_label, corpus)
        logger.info(f"[STATS] {len(rows)} project(s), {total.method_count} method(s), {total.version_count} version(s)")
        return CorpusStats(rows=rows, total=total)

    def compute_project_row(self, project: str, bundles: List[ContextBundle]) -> ProjectStatsRow:
        """
        One statistics row. Changed lines are averaged over versions that
        have a predecessor; the oldest version of each method has none.
        """
        method_count = len(bundles)
        version_count = sum(len(b.history.versions) for b in bundles)

        deltas = [v.changed_lines for b in bundles for v in b.history.versions[:-1]]
        avg_changed: Optional[float] = sum(deltas) / len(deltas) if deltas else None

        days = [b.days for b in bundles]
        return ProjectStatsRow(
            project=project,
            method_count=method_count,
            version_count=version_count,
            avg_versions_per_method=version_count / method_count,
            avg_changed_lines_per_version=avg_changed,
            min_days=min(days),
            max_days=max(days),
            avg_days=sum(days) / method_count,
        )


def create_stats_engine(total_label: str = TOTAL_ROW) -> StatsEngine:
    """Factory function to create a StatsEngine"""
    return StatsEngine(total_label)


def corpus_stats(corpus: List[ContextBundle]) -> CorpusStats:
    return create_stats_engine().compute_corpus_stats(corpus)
