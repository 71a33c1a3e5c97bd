"""
ctxrep Corpus Miner
Walks a git repository's history and builds one ContextBundle per Java method:
version history, longest caller and callee, and lifetime in days.
"""

import difflib
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from git import Repo
from git.exc import GitCommandError, InvalidGitRepositoryError, NoSuchPathError
from git.objects import Commit
from loguru import logger
from pydantic import ValidationError

from ctxrep.config import get_settings
from ctxrep.engines.context_encoder import tokenize
from ctxrep.engines.java_parser import MethodSpan, extract_methods
from ctxrep.errors import MethodNotFound, RepositoryUnreadable, SchemaError, UnresolvedMethod
from ctxrep.models import (
    CallHierarchy,
    ContextBundle,
    LabeledPair,
    MethodIdentity,
    MethodVersion,
    PairJudgments,
    PairRecord,
    VersionHistory,
)
from ctxrep.services.corpus_store import iter_jsonl

SECONDS_PER_DAY = 86400


def count_changed_lines(old: str, new: str) -> int:
    """Added plus deleted lines between two method texts"""
    matcher = difflib.SequenceMatcher(a=old.splitlines(), b=new.splitlines(), autojunk=False)
    changed = 0
    for tag, i1, i2, j1, j2 in matcher.get_opcodes():
        if tag != "equal":
            changed += (i2 - i1) + (j2 - j1)
    return changed


def lifetime_days(head_time: int, oldest_time: int) -> int:
    return max(0, (head_time - oldest_time) // SECONDS_PER_DAY)


def _find_span(spans: Sequence[MethodSpan], identity: MethodIdentity) -> Optional[MethodSpan]:
    return next(
        (s for s in spans if s.qualified_name == identity.qualified_name and s.signature == identity.signature),
        None,
    )


# ==========================================
# CALL HIERARCHY
# ==========================================

@dataclass(frozen=True)
class _IndexedMethod:
    file_path: str
    span: MethodSpan
    token_count: int

    @property
    def rank(self) -> Tuple[int, str, str, str]:
        # most tokens first, then lexicographic qualified name
        return (-self.token_count, self.span.qualified_name, self.file_path, self.span.signature)


class CallGraphIndex:
    """
    Name+arity call graph over one project snapshot.
    Calls that match no in-project method are ignored.
    """

    def __init__(self, methods: Dict[str, List[MethodSpan]]):
        self.entries: List[_IndexedMethod] = []
        self.by_signature: Dict[Tuple[str, int], List[_IndexedMethod]] = defaultdict(list)
        self.callers_of: Dict[Tuple[str, int], List[_IndexedMethod]] = defaultdict(list)

        for file_path in sorted(methods):
            for span in methods[file_path]:
                entry = _IndexedMethod(file_path, span, len(tokenize(span.text)))
                self.entries.append(entry)
                self.by_signature[(span.name, span.arity)].append(entry)
                for call in set(span.invocations):
                    self.callers_of[call].append(entry)

    @staticmethod
    def _longest(candidates: Iterable[_IndexedMethod]) -> Optional[str]:
        best = min(candidates, key=lambda e: e.rank, default=None)
        return best.span.text if best else None

    def hierarchy(self, file_path: str, span: MethodSpan) -> CallHierarchy:
        def is_self(entry: _IndexedMethod) -> bool:
            return entry.file_path == file_path and entry.span.qualified_name == span.qualified_name \
                and entry.span.signature == span.signature

        callers = [e for e in self.callers_of.get((span.name, span.arity), []) if not is_self(e)]
        callees = [
            e
            for call in set(span.invocations)
            for e in self.by_signature.get(call, [])
            if not is_self(e)
        ]
        return CallHierarchy(longest_caller=self._longest(callers), longest_callee=self._longest(callees))


def mine_call_hierarchy(snapshot: Dict[str, str], identity: MethodIdentity) -> CallHierarchy:
    """
    Longest caller and callee of one method within a project snapshot.

    Args:
        snapshot: HEAD file path -> Java source
        identity: the method whose neighbours are wanted

    Returns:
        CallHierarchy; a side with no candidates stays empty
    """
    methods = {path: extract_methods(source, where=path) for path, source in snapshot.items()}
    span = _find_span(methods.get(identity.file_path, []), identity)
    if span is None:
        return CallHierarchy()
    return CallGraphIndex(methods).hierarchy(identity.file_path, span)


# ==========================================
# REPOSITORY MINER
# ==========================================

class RepositoryMiner:
    """
    Mines one repository. Each instance owns its repository handle, so
    workers mining different repositories never share state.
    """

    def __init__(self, repo_path: Union[str, Path], project: Optional[str] = None):
        self.repo_path = Path(repo_path)
        try:
            self.repo = Repo(self.repo_path)
        except (InvalidGitRepositoryError, NoSuchPathError) as e:
            raise RepositoryUnreadable(f"{repo_path} is not a git repository: {e}")
        try:
            self.head: Commit = self.repo.head.commit
        except ValueError as e:
            raise RepositoryUnreadable(f"{repo_path} has no commits: {e}")

        self.head_time = self.head.authored_date
        self.project = project or self.repo_path.resolve().name
        self._parsed: Dict[str, List[MethodSpan]] = {}
        self._logs: Dict[str, List[Tuple[Commit, str]]] = {}
        self._snapshot: Optional[Dict[str, str]] = None

    def snapshot(self) -> Dict[str, str]:
        """HEAD Java files, path -> source"""
        if self._snapshot is None:
            files = {}
            for item in self.head.tree.traverse():
                if item.type == "blob" and item.path.endswith(".java"):
                    files[item.path] = item.data_stream.read().decode("utf-8", errors="replace")
            self._snapshot = dict(sorted(files.items()))
            logger.debug(f"[MINE] {self.project}: {len(files)} Java file(s) at HEAD {self.head.hexsha[:8]}")
        return self._snapshot

    def _methods_in(self, commit: Commit, path: str) -> Optional[List[MethodSpan]]:
        try:
            blob = commit.tree / path
        except KeyError:
            return None
        if blob.hexsha not in self._parsed:
            source = blob.data_stream.read().decode("utf-8", errors="replace")
            self._parsed[blob.hexsha] = extract_methods(source, where=f"{commit.hexsha[:8]}:{path}")
        return self._parsed[blob.hexsha]

    def _file_log(self, path: str) -> List[Tuple[Commit, str]]:
        """Commits touching the file, newest first, with the file's path at each commit"""
        if path in self._logs:
            return self._logs[path]
        try:
            # unquoted paths, so non-ASCII names resolve against commit trees
            output = self.repo.git(c="core.quotePath=false").log(
                "--follow", "-M", "--format=%H", "--name-only", "--", path
            )
        except GitCommandError as e:
            raise RepositoryUnreadable(f"git log failed for {path}: {e}")

        entries: List[Tuple[str, Optional[str]]] = []
        for line in output.splitlines():
            line = line.strip()
            if not line:
                continue
            if len(line) == 40 and all(c in "0123456789abcdef" for c in line):
                entries.append((line, None))
            elif entries and entries[-1][1] is None:
                entries[-1] = (entries[-1][0], line)

        log: List[Tuple[Commit, str]] = []
        current_path = path
        for hexsha, named in entries:
            current_path = named or current_path
            log.append((self.repo.commit(hexsha), current_path))
        self._logs[path] = log
        return log

    def build_version_history(self, identity: MethodIdentity) -> VersionHistory:
        """
        Every distinct snapshot of a method, newest first.

        Args:
            identity: method as it exists at HEAD

        Returns:
            VersionHistory with consecutive duplicate bodies collapsed
        """
        head_span = _find_span(self._methods_in(self.head, identity.file_path) or [], identity)
        if head_span is None:
            raise MethodNotFound(f"{identity} does not exist at HEAD")

        snapshots: List[Tuple[str, int, str]] = []  # newest first
        for commit, path in self._file_log(identity.file_path):
            spans = self._methods_in(commit, path)
            span = _find_span(spans, identity) if spans is not None else None
            if span is None:
                break
            snapshots.append((commit.hexsha, commit.authored_date, span.text))
        if not snapshots or snapshots[0][2] != head_span.text:
            snapshots.insert(0, (self.head.hexsha, self.head_time, head_span.text))

        # author times strictly decrease; a snapshot not older than the newer kept one is dropped
        ordered = snapshots[:1]
        for snapshot in snapshots[1:]:
            if snapshot[1] < ordered[-1][1]:
                ordered.append(snapshot)
        if len(ordered) < len(snapshots):
            logger.warning(
                f"[MINE] {identity}: dropped {len(snapshots) - len(ordered)} version(s) with out-of-order author times"
            )

        kept: List[MethodVersion] = []
        for hexsha, author_time, text in reversed(ordered):
            if kept and kept[-1].source_text == text:
                continue
            changed = count_changed_lines(kept[-1].source_text, text) if kept else 0
            kept.append(MethodVersion(commit_hash=hexsha, author_time=author_time, source_text=text, changed_lines=changed))

        versions = list(reversed(kept))
        return VersionHistory(
            identity=identity,
            versions=versions,
            lifetime_days=lifetime_days(self.head_time, min(v.author_time for v in versions)),
        )

    def mine(self) -> List[ContextBundle]:
        """Bundles for every method at HEAD, sorted by identity"""
        snapshot = self.snapshot()
        methods = {path: self._methods_in(self.head, path) or [] for path in snapshot}
        index = CallGraphIndex(methods)

        bundles = []
        for path, spans in methods.items():
            for span in spans:
                history = self.build_version_history(span.identity(self.project, path))
                bundles.append(ContextBundle(
                    history=history,
                    calls=index.hierarchy(path, span),
                    days=history.lifetime_days,
                ))
        bundles.sort(key=lambda b: b.identity.sort_key)

        version_count = sum(len(b.history.versions) for b in bundles)
        logger.info(f"[MINE] {self.project}: {len(bundles)} method(s), {version_count} version(s)")
        return bundles


def create_repository_miner(repo_path: Union[str, Path], project: Optional[str] = None) -> RepositoryMiner:
    """Factory function to create a RepositoryMiner"""
    return RepositoryMiner(repo_path, project)


def build_version_history(repo: Union[str, Path, RepositoryMiner], identity: MethodIdentity) -> VersionHistory:
    miner = repo if isinstance(repo, RepositoryMiner) else RepositoryMiner(repo, identity.project)
    return miner.build_version_history(identity)


def _mine_one(job: Tuple[str, Optional[str]]) -> List[ContextBundle]:
    path, project = job
    return RepositoryMiner(path, project).mine()


def mine_repositories(
    repo_paths: Sequence[Union[str, Path]],
    projects: Optional[Sequence[Optional[str]]] = None,
    workers: Optional[int] = None,
) -> List[ContextBundle]:
    """
    Mine several repositories, optionally in a process pool.
    Output order follows input order regardless of worker count.
    """
    workers = workers or get_settings().mine_workers
    names = list(projects) if projects else [None] * len(repo_paths)
    jobs = [(str(p), n) for p, n in zip(repo_paths, names)]

    if workers > 1 and len(jobs) > 1:
        logger.info(f"[MINE] Mining {len(jobs)} repositories with {workers} workers")
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_mine_one, jobs))
    else:
        results = [_mine_one(job) for job in jobs]
    return [bundle for result in results for bundle in result]


# ==========================================
# LABELED PAIRS
# ==========================================

def load_labeled_pairs(
    path: Union[str, Path],
    known: Optional[Set[MethodIdentity]] = None,
    weights: Optional[Tuple[float, float, float]] = None,
    threshold: Optional[float] = None,
) -> List[LabeledPair]:
    """
    Read judged method pairs; label = 1 iff the weighted positive share
    exceeds the threshold.

    Args:
        path: JSONL of {a, b, high_yes, med_yes, low_yes, high_no, med_no, low_no}
        known: identities of the mined corpus; None skips resolution
        weights: (high, medium, low); settings when None
        threshold: label threshold; settings when None

    Returns:
        Pairs in file order
    """
    settings = get_settings()
    weights = weights or settings.label_weights
    threshold = settings.label_threshold if threshold is None else threshold

    pairs = []
    for line_number, data in iter_jsonl(path):
        try:
            record = PairRecord.model_validate(data)
        except ValidationError as e:
            raise SchemaError(str(e).splitlines()[0], line_number)
        a, b = record.a.identity(), record.b.identity()
        if a == b:
            raise SchemaError("a pair must reference two different methods", line_number)
        if known is not None:
            for identity in (a, b):
                if identity not in known:
                    raise UnresolvedMethod(f"{identity} is not in the corpus", line_number)

        judgments = PairJudgments(**record.model_dump(include=set(PairJudgments.model_fields)))
        pairs.append(LabeledPair(
            a=a,
            b=b,
            label=int(judgments.score(weights) > threshold),
            confidence_weights=judgments.per_level,
            judgments=judgments,
        ))

    positives = sum(p.label for p in pairs)
    logger.info(f"[MINE] Loaded {len(pairs)} labeled pair(s) ({positives} positive) from {path}")
    return pairs
