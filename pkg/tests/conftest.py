"""
ctxrep Test Configuration
Shared fixtures for all tests
"""

import hashlib
import sys
from typing import List, Optional

import numpy as np
import pytest
from loguru import logger

from ctxrep.config import get_settings
from ctxrep.engines.corpus_miner import count_changed_lines
from ctxrep.models import (
    CallHierarchy,
    ContextBundle,
    FixtureCommit,
    FixtureEdit,
    FixtureMethod,
    FixtureSpec,
    MethodIdentity,
    MethodVersion,
    VersionHistory,
)

HEAD_TIME = 1_700_000_000


# ==========================================
# Settings and logging isolation
# ==========================================

@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch, tmp_path):
    """Fresh settings per test, with experiment output under tmp_path"""
    monkeypatch.setenv("CTXREP_OUTPUT_ROOT", str(tmp_path / "runs"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def reset_logger():
    """CLI tests swap stderr; give every test a live sink"""
    yield
    logger.remove()
    logger.add(sys.stderr, level="WARNING")


# ==========================================
# Java source fixtures
# ==========================================

@pytest.fixture
def counter_source():
    """Class with two methods sum() and reset()"""
    return (
        "package demo;\n"
        "\n"
        "public class Counter {\n"
        "    private int total;\n"
        "\n"
        "    public Counter() {\n"
        "        total = 0;\n"
        "    }\n"
        "\n"
        "    public int sum(int a, int b) {\n"
        "        total = a + b;\n"
        "        return total;\n"
        "    }\n"
        "\n"
        "    public void reset() {\n"
        "        total = 0;\n"
        "    }\n"
        "}\n"
    )


@pytest.fixture
def call_graph_snapshot():
    """One project snapshot with a known call graph"""
    return {
        "src/Calls.java": (
            "public class Calls {\n"
            "    int helper(int x) {\n"
            "        return x;\n"
            "    }\n"
            "\n"
            "    int shortCaller() {\n"
            "        return helper(1);\n"
            "    }\n"
            "\n"
            "    int longCaller() {\n"
            "        int y = 2;\n"
            "        int z = y * 3 + y * 4 + y * 5;\n"
            "        return helper(y + z);\n"
            "    }\n"
            "\n"
            "    int wrongArity() {\n"
            "        int a = 1, b = 2, c = 3, d = 4, e = 5, f = 6, g = 7, h = 8;\n"
            "        return helper(a, b);\n"
            "    }\n"
            "\n"
            "    int lonely() {\n"
            "        return 0;\n"
            "    }\n"
            "}\n"
        ),
        "src/Other.java": (
            "public class Other {\n"
            "    int viaOtherFile() {\n"
            "        return new Calls().helper(7);\n"
            "    }\n"
            "}\n"
        ),
    }


# ==========================================
# Corpus builders
# ==========================================

def build_bundle(
    project: str,
    qualified_name: str,
    texts: List[str],
    days: int = 10,
    file_path: Optional[str] = None,
    signature: str = "",
    caller: Optional[str] = None,
    callee: Optional[str] = None,
    changed: Optional[List[int]] = None,
) -> ContextBundle:
    """A ContextBundle from version texts given newest first"""
    identity = MethodIdentity(
        project=project,
        file_path=file_path or f"src/{qualified_name.split('.')[0]}.java",
        qualified_name=qualified_name,
        signature=signature,
    )
    if changed is None:
        changed = [count_changed_lines(old, new) for new, old in zip(texts, texts[1:])] + [0]
    versions = [
        MethodVersion(
            commit_hash=hashlib.sha1(f"{identity}:{i}".encode()).hexdigest(),
            author_time=HEAD_TIME - i * 3600,
            source_text=text,
            changed_lines=changed[i],
        )
        for i, text in enumerate(texts)
    ]
    return ContextBundle(
        history=VersionHistory(identity=identity, versions=versions, lifetime_days=days),
        calls=CallHierarchy(longest_caller=caller, longest_callee=callee),
        days=days,
    )


@pytest.fixture
def make_bundle():
    return build_bundle


ALPHA_WORDS = ["apple", "anchor", "arrow", "amber", "atlas", "acorn", "alpine", "autumn"]
BETA_WORDS = ["berry", "basket", "bridge", "breeze", "button", "bottle", "banner", "bishop"]


@pytest.fixture
def two_project_corpus():
    """40 methods in two projects with disjoint vocabularies"""
    rng = np.random.default_rng(11)
    bundles = []
    for project, words in (("alpha", ALPHA_WORDS), ("beta", BETA_WORDS)):
        for i in range(20):
            body = " ".join(f"{w};" for w in rng.choice(words, size=12))
            texts = [f"void m{i}() {{ {body} }}", f"void m{i}() {{ {body} extra; }}"]
            bundles.append(build_bundle(project, f"Sample.m{i}", texts, days=int(rng.integers(17, 400))))
    return bundles


# ==========================================
# Fixture specs
# ==========================================

@pytest.fixture
def single_method_spec():
    """One method edited at day 0 and day 10"""
    return FixtureSpec(
        project="single",
        methods=[FixtureMethod(key="m", name="compute", params=["int"])],
        commits=[
            FixtureCommit(day=0, edits=[FixtureEdit(method="m", body=["return p0;"])]),
            FixtureCommit(day=10, edits=[FixtureEdit(method="m", body=["return p0 + 1;"])]),
        ],
    )
