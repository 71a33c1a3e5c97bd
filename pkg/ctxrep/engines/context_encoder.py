"""
ctxrep Context Encoder
Turns a ContextBundle into five fixed-dimension vectors.

Built-in encoder: hashed bag of Java subtokens weighted by tf-idf and
L2-normalized. Embeddings produced elsewhere can be imported instead.
"""

import hashlib
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError
from sklearn.utils import murmurhash3_32

from ctxrep.engines.java_parser import lex_java
from ctxrep.errors import DimensionMismatch, EmptyCorpus, SchemaError, UnresolvedMethod
from ctxrep.models import ContextBundle, EmbeddingRecord, MethodIdentity, VersionHistory
from ctxrep.services.corpus_store import iter_jsonl, write_jsonl

ENCODER_BUILTIN = "hashed-tfidf"
ENCODER_EXTERNAL = "external"

_SUBTOKEN = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")


# ==========================================
# TOKENIZER
# ==========================================

def split_identifier(identifier: str) -> List[str]:
    """sumThenReset -> [sum, then, reset]; HTTPServer_v2 -> [http, server, v, 2]"""
    parts = [p.lower() for p in _SUBTOKEN.findall(identifier)]
    return parts or [identifier.lower()]


def tokenize(source: str) -> List[str]:
    """
    Java-aware lexical split: identifiers broken into lowercase subtokens,
    keywords, literals and operators kept whole, comments dropped.
    """
    tokens: List[str] = []
    for token in lex_java(source):
        if token.kind == "identifier":
            tokens.extend(split_identifier(token.value))
        else:
            tokens.append(token.value)
    return tokens


def history_tokens(history: VersionHistory, max_tokens: int) -> List[str]:
    """Version token streams newest first, cut at max_tokens on a token boundary"""
    stream: List[str] = []
    for version in history.versions:
        remaining = max_tokens - len(stream)
        if remaining <= 0:
            break
        stream.extend(tokenize(version.source_text)[:remaining])
    return stream


# ==========================================
# MODELS
# ==========================================

@lru_cache(maxsize=1 << 18)
def _token_hash(token: str, seed: int) -> int:
    return murmurhash3_32(token, seed=seed, positive=True)


@dataclass(frozen=True, eq=False)
class VocabModel:
    """Fitted hashing vocabulary: bucket idf weights plus days statistics"""

    dimension: int
    seed: int
    idf: np.ndarray
    days_mean: float
    days_std: float
    document_count: int

    def bucket(self, token: str) -> int:
        return _token_hash(token, self.seed) % self.dimension

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(f"{self.dimension}|{self.seed}|{self.days_mean!r}|{self.days_std!r}|{self.document_count}".encode())
        digest.update(self.idf.tobytes())
        return digest.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class EncodedMethod:
    """The five representations of one method"""

    code: np.ndarray
    history: np.ndarray
    caller: np.ndarray
    callee: np.ndarray
    days: np.ndarray  # shape (1,)

    @property
    def dimension(self) -> int:
        return int(self.code.shape[0])

    def to_record(self, identity: MethodIdentity) -> Dict:
        return {
            "locator": identity.locator(),
            "code": self.code,
            "history": self.history,
            "caller": self.caller,
            "callee": self.callee,
            "days": self.days,
        }


# ==========================================
# OPERATIONS
# ==========================================

def fit_vocabulary(corpus: List[ContextBundle], dimension: int, seed: int) -> VocabModel:
    """
    Fit bucket idf weights over current-version texts, idf = ln(N / df).

    Args:
        corpus: training bundles
        dimension: number of hash buckets (>= 8)
        seed: murmurhash seed

    Returns:
        Immutable VocabModel
    """
    if not corpus:
        raise EmptyCorpus("cannot fit a vocabulary on an empty corpus")
    if dimension < 8:
        raise DimensionMismatch(f"dimension must be at least 8, got {dimension}")

    document_frequency = np.zeros(dimension, dtype=np.int64)
    for bundle in corpus:
        buckets = {_token_hash(t, seed) % dimension for t in tokenize(bundle.current_text)}
        if buckets:
            document_frequency[list(buckets)] += 1

    n = len(corpus)
    idf = np.log(n / np.maximum(document_frequency, 1))
    days = np.array([b.days for b in corpus], dtype=np.float64)
    model = VocabModel(
        dimension=dimension,
        seed=seed,
        idf=idf,
        days_mean=float(days.mean()),
        days_std=float(days.std()),
        document_count=n,
    )
    logger.info(f"[ENCODE] Fitted vocabulary D={dimension} seed={seed} over {n} document(s)")
    return model


def encode_tokens(tokens: List[str], model: VocabModel) -> np.ndarray:
    if not tokens:
        return np.zeros(model.dimension)
    buckets = np.fromiter((model.bucket(t) for t in tokens), dtype=np.int64, count=len(tokens))
    weighted = np.bincount(buckets, minlength=model.dimension).astype(np.float64) * model.idf
    norm = np.linalg.norm(weighted)
    if norm == 0:
        return np.zeros(model.dimension)
    return weighted / norm


def encode_code(text: str, model: VocabModel) -> np.ndarray:
    return encode_tokens(tokenize(text), model)


def encode_history(history: VersionHistory, model: VocabModel, max_tokens: int) -> np.ndarray:
    return encode_tokens(history_tokens(history, max_tokens), model)


def encode_days(days: int, model: VocabModel) -> np.ndarray:
    """Standardized against the training corpus; a constant corpus maps to 0"""
    if model.days_std == 0:
        return np.zeros(1)
    return np.array([(days - model.days_mean) / model.days_std])


def encode_bundle(bundle: ContextBundle, model: VocabModel, max_tokens: int) -> EncodedMethod:
    caller = bundle.calls.longest_caller
    callee = bundle.calls.longest_callee
    return EncodedMethod(
        code=encode_code(bundle.current_text, model),
        history=encode_history(bundle.history, model, max_tokens),
        caller=encode_code(caller, model) if caller else np.zeros(model.dimension),
        callee=encode_code(callee, model) if callee else np.zeros(model.dimension),
        days=encode_days(bundle.days, model),
    )


def _vector(values: Optional[List[float]], dimension: int, field: str, line_number: int) -> np.ndarray:
    if values is None:
        return np.zeros(dimension)
    vector = np.asarray(values, dtype=np.float64)
    if vector.shape != (dimension,):
        raise DimensionMismatch(f"line {line_number}: {field} has dimension {vector.shape[0]}, expected {dimension}")
    if not np.all(np.isfinite(vector)):
        raise SchemaError(f"{field} contains non-finite values", line_number)
    return vector


def import_external_embeddings(
    path: Union[str, Path],
    dimension: Optional[int] = None,
    known: Optional[Set[MethodIdentity]] = None,
) -> Dict[MethodIdentity, EncodedMethod]:
    """
    Load embeddings produced outside the toolkit.

    Args:
        path: JSONL of {locator, code, history, caller, callee, days}
        dimension: expected D; taken from the first record when None
        known: identities of the mined corpus; unknown locators are rejected

    Returns:
        Map of identity to EncodedMethod (absent caller/callee become zeros)
    """
    encodings: Dict[MethodIdentity, EncodedMethod] = {}
    for line_number, data in iter_jsonl(path):
        try:
            record = EmbeddingRecord.model_validate(data)
        except ValidationError as e:
            raise SchemaError(str(e).splitlines()[0], line_number)
        identity = record.locator.identity()
        if known is not None and identity not in known:
            raise UnresolvedMethod(f"{identity} is not in the corpus", line_number)
        if dimension is None:
            dimension = len(record.code)
        encodings[identity] = EncodedMethod(
            code=_vector(record.code, dimension, "code", line_number),
            history=_vector(record.history, dimension, "history", line_number),
            caller=_vector(record.caller, dimension, "caller", line_number),
            callee=_vector(record.callee, dimension, "callee", line_number),
            days=_vector(record.days, 1, "days", line_number),
        )
    logger.info(f"[ENCODE] Imported {len(encodings)} external embedding(s) from {path}")
    return encodings


# ==========================================
# ENGINE
# ==========================================

class ContextEncoder:
    """
    Encodes whole corpora with a fitted vocabulary, letting imported
    embeddings take precedence for the methods they cover.
    """

    def __init__(
        self,
        model: VocabModel,
        max_tokens: int = 512,
        external: Optional[Dict[MethodIdentity, EncodedMethod]] = None,
    ):
        self.model = model
        self.max_tokens = max_tokens
        self.external = external or {}
        if self.external:
            dimensions = {e.dimension for e in self.external.values()}
            if dimensions != {model.dimension}:
                raise DimensionMismatch(
                    f"external embeddings have dimension {sorted(dimensions)}, encoder uses {model.dimension}"
                )

    @property
    def label(self) -> str:
        return ENCODER_EXTERNAL if self.external else ENCODER_BUILTIN

    def fingerprint(self) -> str:
        digest = hashlib.sha256(f"{self.model.fingerprint()}|{self.max_tokens}|{self.label}".encode())
        for identity in sorted(self.external, key=lambda i: i.sort_key):
            encoded = self.external[identity]
            digest.update(str(identity).encode())
            for part in (encoded.code, encoded.history, encoded.caller, encoded.callee, encoded.days):
                digest.update(part.tobytes())
        return digest.hexdigest()[:16]

    def encode(self, bundle: ContextBundle) -> EncodedMethod:
        override = self.external.get(bundle.identity)
        if override is not None:
            return override
        return encode_bundle(bundle, self.model, self.max_tokens)

    def encode_corpus(self, corpus: Iterable[ContextBundle]) -> Dict[MethodIdentity, EncodedMethod]:
        encodings = {bundle.identity: self.encode(bundle) for bundle in corpus}
        logger.info(f"[ENCODE] Encoded {len(encodings)} method(s) ({self.label}, D={self.model.dimension})")
        return encodings


def create_context_encoder(
    corpus: List[ContextBundle],
    dimension: int = 128,
    seed: int = 7,
    max_tokens: int = 512,
    external_path: Optional[Union[str, Path]] = None,
) -> ContextEncoder:
    """Fit a vocabulary on the corpus and attach imported embeddings if given"""
    model = fit_vocabulary(corpus, dimension, seed)
    external = None
    if external_path:
        known = {bundle.identity for bundle in corpus}
        external = import_external_embeddings(external_path, dimension, known)
    return ContextEncoder(model, max_tokens, external)


def save_encodings(path: Union[str, Path], encodings: Dict[MethodIdentity, EncodedMethod]) -> int:
    return write_jsonl(path, (encoded.to_record(identity) for identity, encoded in encodings.items()))
