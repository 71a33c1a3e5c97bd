"""
ctxrep Fixture Engine
Synthetic git repositories built from a FixtureSpec, plus the histories
mining them must produce. Used to check the miner end to end.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from git import Actor, Repo
from git.exc import GitCommandError
from loguru import logger

from ctxrep.engines.corpus_miner import count_changed_lines, lifetime_days
from ctxrep.errors import FixtureIoError
from ctxrep.models import (
    FixtureCommit,
    FixtureEdit,
    FixtureMethod,
    FixtureSpec,
    MethodIdentity,
    MethodVersion,
    VersionHistory,
)

FIXTURE_AUTHOR = Actor("Fixture Author", "fixture@example.com")
SECONDS_PER_DAY = 86400


def render_method(method: FixtureMethod, body: List[str]) -> str:
    """Exact source text the parser will extract for this method"""
    params = ", ".join(f"{kind} p{i}" for i, kind in enumerate(method.params))
    lines = "".join(f"        {line}\n" for line in body)
    return f"public {method.return_type} {method.name}({params}) {{\n{lines}    }}"


def method_identity(spec: FixtureSpec, method: FixtureMethod, file_path: str) -> MethodIdentity:
    return MethodIdentity(
        project=spec.project,
        file_path=file_path,
        qualified_name=f"{method.class_name}.{method.name}",
        signature=",".join(method.params),
    )


def commit_time(spec: FixtureSpec, index: int) -> int:
    """Commits on the same day stay strictly ordered by one second per index"""
    return spec.start_time + spec.commits[index].day * SECONDS_PER_DAY + index


@dataclass
class _FixtureState:
    """Working-tree model: which bodies exist where, after each commit"""

    spec: FixtureSpec
    bodies: Dict[str, Optional[List[str]]] = field(default_factory=dict)
    paths: Dict[str, str] = field(default_factory=dict)
    touches: Dict[str, List[str]] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)  # every path ever materialized, in creation order

    def __post_init__(self):
        for method in self.spec.methods:
            self.bodies[method.key] = None
            self.paths[method.key] = method.file_path

    def method(self, key: str) -> FixtureMethod:
        return next(m for m in self.spec.methods if m.key == key)

    def rename(self, old: str, new: str) -> None:
        if old not in self.files:
            raise FixtureIoError(f"cannot rename {old}: file does not exist yet")
        for key, path in self.paths.items():
            if path == old:
                self.paths[key] = new
        self.touches[new] = self.touches.pop(old, [])
        self.files[self.files.index(old)] = new

    def apply(self, edit: FixtureEdit) -> None:
        self.bodies[edit.method] = list(edit.body) if edit.body is not None else None
        path = self.paths[edit.method]
        if edit.body is not None and path not in self.files:
            self.files.append(path)

    def touch(self, path: str, line: str) -> None:
        if path not in self.files:
            self.files.append(path)
        self.touches.setdefault(path, []).append(line)

    def text_of(self, key: str) -> Optional[str]:
        body = self.bodies[key]
        return render_method(self.method(key), body) if body is not None else None

    def render_file(self, path: str) -> str:
        members = [m for m in self.spec.methods if self.paths[m.key] == path]
        class_name = members[0].class_name if members else Path(path).stem
        lines = [f"public class {class_name} {{\n"]
        lines.extend(f"    // {note}\n" for note in self.touches.get(path, []))
        for member in members:
            text = self.text_of(member.key)
            if text is not None:
                lines.append("\n    " + text + "\n")
        lines.append("}\n")
        return "".join(lines)


@dataclass
class SyntheticRepository:
    path: Path
    commits: List[str]
    head_time: int


def synth_fixture(spec: FixtureSpec, seed: int, out_dir: Union[str, Path]) -> SyntheticRepository:
    """
    Create a real git repository whose mined output equals the spec.

    Args:
        spec: methods, per-commit edits and timestamps
        seed: drives the content of unrelated "touch" changes
        out_dir: empty or missing directory for the repository

    Returns:
        SyntheticRepository with commit hashes oldest first
    """
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    try:
        if out_dir.exists() and any(out_dir.iterdir()):
            raise FixtureIoError(f"{out_dir} is not empty")
        out_dir.mkdir(parents=True, exist_ok=True)
        repo = Repo.init(out_dir)

        state = _FixtureState(spec)
        hashes: List[str] = []
        for index, commit in enumerate(spec.commits):
            for old, new in commit.renames.items():
                state.rename(old, new)
                (out_dir / new).parent.mkdir(parents=True, exist_ok=True)
                repo.git.mv(old, new)
            for edit in commit.edits:
                state.apply(edit)
            for path in commit.touch:
                state.touch(path, f"touch {index} {int(rng.integers(0, 2**32)):08x}")

            for path in state.files:
                target = out_dir / path
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_text(state.render_file(path), encoding="utf-8", newline="\n")
            if state.files:
                repo.index.add(state.files)

            stamp = f"{commit_time(spec, index)} +0000"
            made = repo.index.commit(
                commit.message or f"fixture commit {index}",
                author=FIXTURE_AUTHOR,
                committer=FIXTURE_AUTHOR,
                author_date=stamp,
                commit_date=stamp,
            )
            hashes.append(made.hexsha)
    except (OSError, GitCommandError) as e:
        raise FixtureIoError(f"could not write fixture repository at {out_dir}: {e}")

    logger.info(f"[FIXTURE] Built {out_dir} with {len(hashes)} commit(s), {len(spec.methods)} method(s)")
    return SyntheticRepository(path=out_dir, commits=hashes, head_time=commit_time(spec, len(spec.commits) - 1))


def expected_histories(spec: FixtureSpec, commits: List[str]) -> Dict[MethodIdentity, VersionHistory]:
    """
    The version histories mining the fixture must produce, computed
    without git. A removed method that comes back starts a fresh history.
    """
    state = _FixtureState(spec)
    runs: Dict[str, List[Tuple[int, str]]] = {m.key: [] for m in spec.methods}

    for index, commit in enumerate(spec.commits):
        for old, new in commit.renames.items():
            state.rename(old, new)
        for edit in commit.edits:
            state.apply(edit)
            text = state.text_of(edit.method)
            if text is None:
                runs[edit.method] = []
            elif not runs[edit.method] or runs[edit.method][-1][1] != text:
                runs[edit.method].append((index, text))

    head_time = commit_time(spec, len(spec.commits) - 1)
    histories = {}
    for method in spec.methods:
        if state.bodies[method.key] is None:
            continue
        kept: List[MethodVersion] = []
        for index, text in runs[method.key]:
            changed = count_changed_lines(kept[-1].source_text, text) if kept else 0
            kept.append(MethodVersion(
                commit_hash=commits[index],
                author_time=commit_time(spec, index),
                source_text=text,
                changed_lines=changed,
            ))
        identity = method_identity(spec, method, state.paths[method.key])
        histories[identity] = VersionHistory(
            identity=identity,
            versions=list(reversed(kept)),
            lifetime_days=lifetime_days(head_time, kept[0].author_time),
        )
    return histories


def random_fixture_spec(seed: int) -> FixtureSpec:
    """
    A randomized but valid spec: 1-3 files, 1-5 methods, 2-8 commits with
    edits (some of them no-ops), removals, unrelated touches and file moves.
    """
    rng = np.random.default_rng(seed)
    param_kinds = ["int", "long", "String", "int[]"]

    file_count = int(rng.integers(1, 4))
    files = [(f"src/main/java/fixture/C{i}.java", f"C{i}") for i in range(file_count)]
    methods = []
    for k in range(int(rng.integers(1, 6))):
        path, class_name = files[int(rng.integers(0, file_count))]
        params = [param_kinds[int(j)] for j in rng.integers(0, len(param_kinds), size=int(rng.integers(0, 3)))]
        methods.append(FixtureMethod(key=f"m{k}", file_path=path, class_name=class_name, name=f"m{k}", params=params))

    def body() -> List[str]:
        lines = [f"int v{j} = {int(rng.integers(0, 3))};" for j in range(int(rng.integers(0, 3)))]
        return lines + ["return 0;"]

    current_paths = {path: path for path, _ in files}
    introduced = set()
    commits = []
    day = 0
    moves = 0
    for index in range(int(rng.integers(2, 9))):
        day += int(rng.integers(0, 15))
        if index == 0:
            chosen = [m for m in methods if rng.random() < 0.6] or [methods[0]]
            edits = [FixtureEdit(method=m.key, body=body()) for m in chosen]
            introduced.update(m.key for m in chosen)
            commits.append(FixtureCommit(day=day, edits=edits))
            continue

        live_files = sorted({current_paths[m.file_path] for m in methods if m.key in introduced})
        if live_files and rng.random() < 0.15:
            old = live_files[int(rng.integers(0, len(live_files)))]
            new = old.replace("fixture/", f"fixture/moved{moves}/", 1)
            moves += 1
            for original, now in current_paths.items():
                if now == old:
                    current_paths[original] = new
            commits.append(FixtureCommit(day=day, renames={old: new}))
            continue

        edits = []
        for method in methods:
            if rng.random() >= 0.4:
                continue
            if method.key in introduced and rng.random() < 0.1:
                edits.append(FixtureEdit(method=method.key, body=None))
                introduced.discard(method.key)
            else:
                edits.append(FixtureEdit(method=method.key, body=body()))
                introduced.add(method.key)
        touch = []
        if live_files and rng.random() < 0.3:
            touch.append(live_files[int(rng.integers(0, len(live_files)))])
        commits.append(FixtureCommit(day=day, edits=edits, touch=touch))

    return FixtureSpec(project=f"fixture{seed}", methods=methods, commits=commits)
