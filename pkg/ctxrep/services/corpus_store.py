"""
ctxrep Corpus Store
JSON and JSONL persistence for corpora, encodings, models and result matrices
"""

from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Tuple, Union

import orjson
from loguru import logger
from pydantic import ValidationError

from ctxrep.errors import SchemaError
from ctxrep.models import (
    CallHierarchy,
    ContextBundle,
    MethodIdentity,
    MethodVersion,
    ResultMatrix,
    VersionHistory,
)

PathLike = Union[str, Path]

MATRIX_FILE = "matrix.json"


# ==========================================
# Raw JSON / JSONL
# ==========================================

def iter_jsonl(path: PathLike) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """
    Yield (1-based line number, object) for every non-blank line.

    Raises:
        SchemaError: a line is not valid JSON or not a JSON object
    """
    with open(path, "rb") as handle:
        for line_number, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                data = orjson.loads(raw)
            except orjson.JSONDecodeError as e:
                raise SchemaError(f"invalid JSON: {e}", line_number)
            if not isinstance(data, dict):
                raise SchemaError("expected a JSON object", line_number)
            yield line_number, data


def write_jsonl(path: PathLike, records: Iterable[Dict[str, Any]]) -> int:
    """Write one object per LF-terminated line; returns the record count"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "wb") as handle:
        for record in records:
            handle.write(orjson.dumps(record, option=orjson.OPT_SERIALIZE_NUMPY))
            handle.write(b"\n")
            count += 1
    logger.debug(f"[STORE] Wrote {count} record(s) to {path}")
    return count


def read_json(path: PathLike) -> Any:
    with open(path, "rb") as handle:
        try:
            return orjson.loads(handle.read())
        except orjson.JSONDecodeError as e:
            raise SchemaError(f"{path}: invalid JSON: {e}")


def write_json(path: PathLike, data: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(data, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY) + b"\n")


# ==========================================
# Corpus
# ==========================================

def bundle_to_record(bundle: ContextBundle) -> Dict[str, Any]:
    """Corpus line with the documented key order"""
    identity = bundle.identity
    return {
        "project": identity.project,
        "file": identity.file_path,
        "name": identity.qualified_name,
        "signature": identity.signature,
        "days": bundle.days,
        "versions": [
            {
                "hash": v.commit_hash,
                "time": v.author_time,
                "text": v.source_text,
                "changed_lines": v.changed_lines,
            }
            for v in bundle.history.versions
        ],
        "caller": bundle.calls.longest_caller,
        "callee": bundle.calls.longest_callee,
    }


def bundle_from_record(data: Dict[str, Any], line_number: int = 0) -> ContextBundle:
    try:
        identity = MethodIdentity.from_locator(data)
        versions = [
            MethodVersion(
                commit_hash=v["hash"],
                author_time=v["time"],
                source_text=v["text"],
                changed_lines=v.get("changed_lines", 0),
            )
            for v in data["versions"]
        ]
        return ContextBundle(
            history=VersionHistory(identity=identity, versions=versions, lifetime_days=data["days"]),
            calls=CallHierarchy(longest_caller=data.get("caller"), longest_callee=data.get("callee")),
            days=data["days"],
        )
    except KeyError as e:
        raise SchemaError(f"missing field {e}", line_number)
    except (ValidationError, TypeError) as e:
        raise SchemaError(str(e).splitlines()[0] if str(e) else type(e).__name__, line_number)


def save_corpus(path: PathLike, bundles: Iterable[ContextBundle]) -> int:
    count = write_jsonl(path, (bundle_to_record(b) for b in bundles))
    logger.info(f"[STORE] Saved corpus of {count} method(s) to {path}")
    return count


def load_corpus(path: PathLike) -> List[ContextBundle]:
    bundles = [bundle_from_record(data, line) for line, data in iter_jsonl(path)]
    logger.info(f"[STORE] Loaded corpus of {len(bundles)} method(s) from {path}")
    return bundles


# ==========================================
# Result matrices
# ==========================================

def matrix_path(target: PathLike) -> Path:
    """Accept either a matrix file or the run directory holding it"""
    target = Path(target)
    return target / MATRIX_FILE if target.is_dir() else target


def save_matrix(target: PathLike, matrix: ResultMatrix) -> Path:
    target = Path(target)
    path = target if target.suffix == ".json" else target / MATRIX_FILE
    write_json(path, matrix.model_dump(mode="json"))
    logger.info(f"[STORE] Saved matrix with {len(matrix.rows)} row(s) to {path}")
    return path


def load_matrix(target: PathLike) -> ResultMatrix:
    path = matrix_path(target)
    try:
        return ResultMatrix.model_validate(read_json(path))
    except ValidationError as e:
        raise SchemaError(f"{path}: {str(e).splitlines()[0]}")
