"""
ctxrep Pydantic Models
Type-safe data structures for the entire toolkit
"""

from enum import Enum
from typing import Optional, List, Dict, Any, Tuple
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# ==========================================
# ENUMS
# ==========================================

class AggregationScheme(str, Enum):
    CONCAT = "concat"
    MAXPOOL = "maxpool"
    DIFF_CONCAT = "diff_concat"

    @property
    def label(self) -> str:
        return {
            "concat": "Concatenation",
            "maxpool": "Max-pooling",
            "diff_concat": "Diff & Concat",
        }[self.value]


class Task(str, Enum):
    CLONE = "clone"
    CLASSIFY = "classify"


class HeadKind(str, Enum):
    SIGMOID = "sigmoid"
    SOFTMAX = "softmax"


class SplitBy(str, Enum):
    PAIRS = "pairs"
    METHOD = "method"


# ==========================================
# METHOD MODELS
# ==========================================

class MethodIdentity(BaseModel):
    """Who a method is: unique within a corpus"""
    model_config = ConfigDict(frozen=True)

    project: str
    file_path: str
    qualified_name: str  # Outer.Inner.method
    signature: str  # comma-separated parameter types, "" for none

    @property
    def sort_key(self) -> Tuple[str, str, str, str]:
        return (self.project, self.file_path, self.qualified_name, self.signature)

    def locator(self) -> Dict[str, str]:
        return {
            "project": self.project,
            "file": self.file_path,
            "name": self.qualified_name,
            "signature": self.signature,
        }

    @classmethod
    def from_locator(cls, data: Dict[str, Any]) -> "MethodIdentity":
        return cls(
            project=data["project"],
            file_path=data["file"],
            qualified_name=data["name"],
            signature=data.get("signature", ""),
        )

    def __str__(self) -> str:
        return f"{self.project}:{self.file_path}:{self.qualified_name}({self.signature})"


class MethodVersion(BaseModel):
    """One kept snapshot of a method body"""
    model_config = ConfigDict(frozen=True)

    commit_hash: str = Field(pattern=r"^[0-9a-f]{40}$")
    author_time: int  # UTC seconds
    source_text: str
    changed_lines: int = Field(default=0, ge=0)


class VersionHistory(BaseModel):
    """Every distinct snapshot of one method, newest first"""

    identity: MethodIdentity
    versions: List[MethodVersion] = Field(min_length=1)
    lifetime_days: int = Field(ge=0)

    @property
    def current(self) -> MethodVersion:
        return self.versions[0]

    @property
    def is_time_ordered(self) -> bool:
        times = [v.author_time for v in self.versions]
        return all(newer > older for newer, older in zip(times, times[1:]))


class CallHierarchy(BaseModel):
    """Token-longest caller and callee source texts"""

    longest_caller: Optional[str] = None
    longest_callee: Optional[str] = None


class ContextBundle(BaseModel):
    """A method's current code plus its four contexts"""

    history: VersionHistory
    calls: CallHierarchy = Field(default_factory=CallHierarchy)
    days: int = Field(ge=0, le=36500)

    @model_validator(mode="after")
    def days_match_lifetime(self):
        if self.days != self.history.lifetime_days:
            raise ValueError(f"days ({self.days}) must equal lifetime_days ({self.history.lifetime_days})")
        return self

    @property
    def identity(self) -> MethodIdentity:
        return self.history.identity

    @property
    def project(self) -> str:
        return self.history.identity.project

    @property
    def current_text(self) -> str:
        return self.history.current.source_text


# ==========================================
# CLONE LABEL MODELS
# ==========================================

class PairJudgments(BaseModel):
    """Human judgment counts per confidence level"""

    high_yes: float = Field(default=0, ge=0)
    med_yes: float = Field(default=0, ge=0)
    low_yes: float = Field(default=0, ge=0)
    high_no: float = Field(default=0, ge=0)
    med_no: float = Field(default=0, ge=0)
    low_no: float = Field(default=0, ge=0)

    def score(self, weights: Tuple[float, float, float]) -> float:
        """Weighted share of positive judgments; 0 when there are none"""
        high, medium, low = weights
        positive = high * self.high_yes + medium * self.med_yes + low * self.low_yes
        negative = high * self.high_no + medium * self.med_no + low * self.low_no
        total = positive + negative
        return positive / total if total > 0 else 0.0

    @property
    def per_level(self) -> Tuple[float, float, float]:
        return (
            self.high_yes + self.high_no,
            self.med_yes + self.med_no,
            self.low_yes + self.low_no,
        )


class LabeledPair(BaseModel):
    """A method pair with its derived clone label"""

    a: MethodIdentity
    b: MethodIdentity
    label: int = Field(ge=0, le=1)
    confidence_weights: Tuple[float, float, float]
    judgments: PairJudgments = Field(default_factory=PairJudgments)

    @model_validator(mode="after")
    def distinct_methods(self):
        if self.a == self.b:
            raise ValueError("a pair must reference two different methods")
        return self

    def canonical(self) -> Tuple[MethodIdentity, MethodIdentity]:
        """Operands in method-id order"""
        if self.b.sort_key < self.a.sort_key:
            return self.b, self.a
        return self.a, self.b


# ==========================================
# INBOUND RECORDS
# ==========================================

class MethodLocator(BaseModel):
    """How JSONL inputs point at a mined method"""

    project: str
    file: str
    name: str
    signature: str = ""

    def identity(self) -> MethodIdentity:
        return MethodIdentity(
            project=self.project,
            file_path=self.file,
            qualified_name=self.name,
            signature=self.signature,
        )


class PairRecord(PairJudgments):
    """One line of a labeled-pairs file"""

    a: MethodLocator
    b: MethodLocator


class EmbeddingRecord(BaseModel):
    """One line of an external embeddings file"""

    locator: MethodLocator
    code: List[float]
    history: List[float]
    caller: Optional[List[float]] = None
    callee: Optional[List[float]] = None
    days: List[float]


# ==========================================
# STATISTICS MODELS
# ==========================================

class ProjectStatsRow(BaseModel):
    """One row of the dataset statistics table"""

    project: str
    method_count: int
    version_count: int
    avg_versions_per_method: float
    avg_changed_lines_per_version: Optional[float] = None  # None renders as "-"
    min_days: int
    max_days: int
    avg_days: float


class CorpusStats(BaseModel):
    rows: List[ProjectStatsRow]
    total: ProjectStatsRow


# ==========================================
# FIXTURE MODELS
# ==========================================

class FixtureMethod(BaseModel):
    """A method a synthetic repository will carry"""

    key: str
    file_path: str = "src/main/java/fixture/Sample.java"
    class_name: str = "Sample"
    name: str
    params: List[str] = Field(default_factory=list)
    return_type: str = "int"


class FixtureEdit(BaseModel):
    """Set a method body; None removes the method"""

    method: str
    body: Optional[List[str]] = None


class FixtureCommit(BaseModel):
    day: int = Field(ge=0, description="Days after the spec's start time")
    edits: List[FixtureEdit] = Field(default_factory=list)
    touch: List[str] = Field(default_factory=list, description="Files that get an unrelated change")
    renames: Dict[str, str] = Field(default_factory=dict)
    message: Optional[str] = None


class FixtureSpec(BaseModel):
    """Methods, per-commit edits and commit timestamps of a synthetic repository"""

    project: str = "fixture"
    start_time: int = 1_600_000_000
    methods: List[FixtureMethod]
    commits: List[FixtureCommit] = Field(min_length=1)

    @model_validator(mode="after")
    def check_consistency(self):
        keys = [m.key for m in self.methods]
        if len(set(keys)) != len(keys):
            raise ValueError("method keys must be unique")
        known = set(keys)
        previous_day = 0
        for commit in self.commits:
            if commit.day < previous_day:
                raise ValueError("commit days must be non-decreasing")
            previous_day = commit.day
            for edit in commit.edits:
                if edit.method not in known:
                    raise ValueError(f"unknown method key: {edit.method}")
        return self


# ==========================================
# EXPERIMENT MODELS
# ==========================================

DEFAULT_CONTEXT_SETS = ["vh", "ch", "vh+ch", "vh+days", "vh+ch+days"]


class ContextSelection(BaseModel):
    """Which contexts join the code vector"""
    model_config = ConfigDict(frozen=True)

    use_history: bool = False
    use_call_hierarchy: bool = False
    use_days: bool = False

    @property
    def name(self) -> str:
        parts = []
        if self.use_history:
            parts.append("vh")
        if self.use_call_hierarchy:
            parts.append("ch")
        if self.use_days:
            parts.append("days")
        return "+".join(parts) if parts else "none"

    @property
    def is_baseline(self) -> bool:
        return not (self.use_history or self.use_call_hierarchy or self.use_days)

    @property
    def context_count(self) -> int:
        return int(self.use_history) + int(self.use_call_hierarchy) + int(self.use_days)

    @classmethod
    def parse(cls, name: str) -> "ContextSelection":
        """Parse 'vh', 'ch', 'vh+ch+days', 'none', ..."""
        name = name.strip().lower()
        if name in ("", "none"):
            return cls()
        parts = [p.strip() for p in name.split("+")]
        unknown = set(parts) - {"vh", "ch", "days"}
        if unknown:
            raise ValueError(f"unknown context(s): {', '.join(sorted(unknown))}")
        return cls(use_history="vh" in parts, use_call_hierarchy="ch" in parts, use_days="days" in parts)


class TrainConfig(BaseModel):
    learning_rate: float = Field(default=0.01, gt=0)
    epochs: int = Field(default=50, ge=0)
    batch_size: int = Field(default=32, gt=0)
    seed: int = 7
    swap_augment: bool = False


class EvalReport(BaseModel):
    """Test-set metrics plus improvement over the without-context baseline"""

    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)
    f1: float = Field(ge=0, le=1)
    accuracy: float = Field(ge=0, le=1)
    pct_improvement: Optional[int] = None
    support: int = 0


class ScenarioConfig(BaseModel):
    """One cell of the experiment matrix"""

    task: Task
    contexts: ContextSelection
    aggregation: AggregationScheme = AggregationScheme.CONCAT

    @model_validator(mode="after")
    def valid_for_task(self):
        if self.task == Task.CLASSIFY and self.aggregation == AggregationScheme.DIFF_CONCAT:
            raise ValueError("diff_concat needs a method pair; classification has one method")
        return self

    @property
    def name(self) -> str:
        return f"{self.task.value}/{self.contexts.name}/{self.aggregation.value}"


class EncoderSettings(BaseModel):
    dimension: int = Field(default=128, ge=8)
    budget: int = Field(default=512, gt=0)
    seed: int = 7
    external: Optional[str] = None


class ExperimentConfig(BaseModel):
    """Everything run_matrix needs"""

    corpus: str
    pairs: Optional[str] = None
    encoder: EncoderSettings = Field(default_factory=EncoderSettings)
    tasks: List[Task] = Field(default_factory=lambda: [Task.CLONE, Task.CLASSIFY])
    context_sets: List[str] = Field(default_factory=lambda: list(DEFAULT_CONTEXT_SETS))
    aggregations: List[AggregationScheme] = Field(default_factory=lambda: list(AggregationScheme))
    train: TrainConfig = Field(default_factory=TrainConfig)
    split_seed: int = 7
    split_by: SplitBy = SplitBy.PAIRS
    output_dir: Optional[str] = None

    @field_validator("context_sets")
    @classmethod
    def known_context_sets(cls, v):
        for name in v:
            ContextSelection.parse(name)
        return v

    def grid(self, task: Task) -> List[ScenarioConfig]:
        """Valid (contexts x aggregation) cells for a task, baseline excluded"""
        cells = []
        for name in self.context_sets:
            selection = ContextSelection.parse(name)
            if selection.is_baseline:
                continue
            for scheme in self.aggregations:
                if task == Task.CLASSIFY and scheme == AggregationScheme.DIFF_CONCAT:
                    continue
                cells.append(ScenarioConfig(task=task, contexts=selection, aggregation=scheme))
        return cells


class ResultRow(BaseModel):
    task: Task
    encoder: str = "hashed-tfidf"
    contexts: str = "none"
    aggregation: Optional[AggregationScheme] = None  # None on the baseline row
    report: Optional[EvalReport] = None
    error: Optional[str] = None
    split_hash: str = ""
    cell_hash: str = ""

    @property
    def is_baseline(self) -> bool:
        return self.contexts == "none"


class ResultMatrix(BaseModel):
    rows: List[ResultRow] = Field(default_factory=list)
    training_steps: int = 0
    metadata: Dict[str, Any] = Field(default_factory=dict)

    def rows_for(self, task: Task) -> List[ResultRow]:
        return [r for r in self.rows if r.task == task]
